#include "nmtwp/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "nmtwp/checkpoint.hpp"
#include "nmtwp/config.hpp"
#include "nmtwp/corpus.hpp"
#include "nmtwp/decoding.hpp"
#include "nmtwp/evaluation.hpp"
#include "nmtwp/gradcheck_suite.hpp"
#include "nmtwp/training.hpp"

namespace nmtwp {

namespace {

namespace fs = std::filesystem;

void usage(std::ostream& out) {
  out << "usage: nmtwp <command> [--config file] [--key value ...]\n"
         "commands:\n"
         "  train          fit a model (files via train-src/train-tgt or a synthetic task)\n"
         "  translate      decode input text with a checkpoint or ensemble\n"
         "  evaluate       score hypothesis text against references\n"
         "  predict-vocab  emit per-sentence predicted target vocabularies\n"
         "  gradcheck      verify analytic gradients by finite differences\n"
         "  synth          generate a synthetic parallel corpus\n";
}

std::string require(const RunConfig& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  if (v.empty())
    throw std::invalid_argument("missing required setting --" + key);
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

ModelDims dims_from(const RunConfig& cfg, int v_src, int v_tgt) {
  ModelDims d;
  d.v_src = v_src;
  d.v_tgt = v_tgt;
  d.d_emb = cfg.get_int("dim.emb");
  d.d_hid = cfg.get_int("dim.hid");
  d.d_att = cfg.get_int("dim.att") > 0 ? cfg.get_int("dim.att") : d.d_hid;
  d.d_readout = cfg.get_int("dim.readout");
  return d;
}

DecodeOptions decode_options(const RunConfig& cfg) {
  DecodeOptions opt;
  opt.beam = cfg.get_int("beam");
  opt.max_len = cfg.get_int("max-out");
  opt.vocab_n = cfg.get_int("vocab-n");
  opt.sliced = cfg.get_bool("sliced");
  return opt;
}

// Load checkpoints named by --ensemble, else the single --model.
std::vector<ModelParams<float>> load_models(const RunConfig& cfg) {
  std::vector<std::string> paths = cfg.get_list("ensemble");
  if (paths.empty()) paths.push_back(require(cfg, "model"));
  std::vector<ModelParams<float>> models;
  for (const auto& p : paths) models.push_back(load_model<float>(p));
  return models;
}

void check_vocab_match(const ModelParams<float>& m, const Vocabulary& src,
                       const Vocabulary& tgt) {
  if (m.dims.v_src != src.size() || m.dims.v_tgt != tgt.size())
    throw std::runtime_error(
        "vocabulary files do not match the checkpoint (model " +
        std::to_string(m.dims.v_src) + "/" + std::to_string(m.dims.v_tgt) +
        ", files " + std::to_string(src.size()) + "/" +
        std::to_string(tgt.size()) + ")");
}

int cmd_train(const RunConfig& cfg) {
  const std::string out_dir = require(cfg, "out");
  fs::create_directories(out_dir);
  open_out(out_dir + "/config.resolved") << cfg.resolved();

  std::vector<SentencePair> train_pairs, val_pairs;
  Vocabulary src_vocab, tgt_vocab;
  const int cap = cfg.get_int("vocab-size");

  if (!cfg.get("train-src").empty()) {
    auto src_lines = read_token_lines(require(cfg, "train-src"));
    auto tgt_lines = read_token_lines(require(cfg, "train-tgt"));
    auto load_or_build = [&](const std::string& key,
                             const std::vector<std::vector<std::string>>& lines,
                             const std::string& fallback) {
      const std::string path = cfg.get(key);
      if (!path.empty() && fs::exists(path)) return Vocabulary::load(path);
      Vocabulary v = Vocabulary::build(lines, cap);
      v.save(path.empty() ? fallback : path);
      return v;
    };
    src_vocab = load_or_build("src-vocab", src_lines, out_dir + "/vocab.src.tsv");
    tgt_vocab = load_or_build("tgt-vocab", tgt_lines, out_dir + "/vocab.tgt.tsv");
    train_pairs = encode_pairs(src_vocab, tgt_vocab, src_lines, tgt_lines);
    if (!cfg.get("val-src").empty()) {
      val_pairs = encode_pairs(src_vocab, tgt_vocab,
                               read_token_lines(cfg.get("val-src")),
                               read_token_lines(require(cfg, "val-tgt")));
    }
  } else {
    const SynthTask task = parse_synth_task(cfg.get("task"));
    const int n = cfg.get_int("n");
    Rng master(cfg.get_u64("seed"));
    Rng tr = master.substream("synth-train");
    Rng va = master.substream("synth-val");
    train_pairs = gen_synthetic(task, n, cap, cfg.get_int("len-lo"),
                                cfg.get_int("len-hi"), tr.next_u64());
    val_pairs = gen_synthetic(task, std::max(1, n / 10), cap, cfg.get_int("len-lo"),
                              cfg.get_int("len-hi"), va.next_u64());
    src_vocab = tgt_vocab = synthetic_vocab(cap);
    src_vocab.save(out_dir + "/vocab.src.tsv");
    tgt_vocab.save(out_dir + "/vocab.tgt.tsv");
  }

  TrainOptions opt;
  opt.objective = parse_objective(cfg.get("objective"));
  opt.dims = dims_from(cfg, src_vocab.size(), tgt_vocab.size());
  opt.batch_size = cfg.get_int("batch");
  opt.max_epochs = cfg.get_int("epochs");
  opt.max_len = cfg.get_int("max-len");
  opt.seed = cfg.get_u64("seed");
  opt.dropout = cfg.get_double("dropout");
  opt.clip_norm = cfg.get_double("clip");
  opt.patience = cfg.get_int("patience");
  opt.out_dir = out_dir;
  opt.pretrain = cfg.get("pretrain");
  opt.freeze_base = cfg.get_bool("freeze-base");

  auto result = train<float>(opt, train_pairs, val_pairs, &std::cerr);
  std::cerr << "finished after " << result.epoch_losses.size()
            << " epochs; best checkpoint " << result.best_checkpoint << "\n";
  std::cout << result.best_checkpoint << "\n";
  return 0;
}

int cmd_translate(const RunConfig& cfg) {
  const Vocabulary src_vocab = Vocabulary::load(require(cfg, "src-vocab"));
  const Vocabulary tgt_vocab = Vocabulary::load(require(cfg, "tgt-vocab"));
  auto models = load_models(cfg);
  for (const auto& m : models) check_vocab_match(m, src_vocab, tgt_vocab);
  std::vector<const ModelParams<float>*> refs;
  for (const auto& m : models) refs.push_back(&m);

  const auto lines = read_token_lines(require(cfg, "input"));
  std::vector<std::vector<int>> sources;
  std::vector<std::size_t> origin;  // input line of each decoded sentence
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    sources.push_back(src_vocab.encode(lines[i]));
    origin.push_back(i);
  }

  const DecodeOptions opt = decode_options(cfg);
  auto decoded = translate_corpus<float>(refs, sources, opt);

  std::vector<std::string> out_lines(lines.size());
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto toks = tgt_vocab.decode(decoded.results[s].ids);
    std::string joined;
    for (std::size_t t = 0; t < toks.size(); ++t)
      joined += (t ? " " : "") + toks[t];
    out_lines[origin[s]] = joined;
  }
  auto out = open_out(require(cfg, "output"));
  for (const auto& l : out_lines) out << l << "\n";

  if (!cfg.get("timing").empty())
    open_out(cfg.get("timing")) << decoded.stats.line() << "\n";

  if (!cfg.get("heatmap").empty()) {
    if (sources.empty()) throw std::runtime_error("no sentence to draw a heatmap for");
    std::vector<int> y = decoded.results[0].ids;
    y.push_back(Vocabulary::kEos);
    auto labels = tgt_vocab.decode(y);
    auto weights = attention_matrix(models[0], sources[0], y);
    auto hm = open_out(cfg.get("heatmap"));
    export_heatmap(hm, lines[origin[0]], labels, weights);
  }

  if (decoded.unfinished > 0)
    std::cerr << "warning: " << decoded.unfinished
              << " sentence(s) hit the length limit without finishing\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  const auto hyps = read_token_lines(require(cfg, "hyp"));
  const auto refs = read_token_lines(require(cfg, "ref"));
  if (hyps.size() != refs.size())
    throw std::runtime_error("hypothesis and reference files differ in length");

  EvalReport report;
  report.add("bleu", corpus_bleu(hyps, as_multi_refs(refs)));

  // Positional accuracy over case-sensitive interned tokens.
  std::map<std::string, int> intern;
  auto to_ids = [&](const std::vector<std::string>& toks) {
    std::vector<int> ids;
    for (const auto& t : toks)
      ids.push_back(intern.emplace(t, static_cast<int>(intern.size()) +
                                          Vocabulary::kNumReserved)
                        .first->second);
    return ids;
  };
  std::vector<std::vector<int>> hyp_ids, ref_ids;
  for (const auto& h : hyps) hyp_ids.push_back(to_ids(h));
  for (const auto& r : refs) ref_ids.push_back(to_ids(r));
  report.add("token_accuracy", token_accuracy(hyp_ids, ref_ids));

  if (!cfg.get("input").empty()) {
    // Predicted-vocabulary lines scored against reference ids.
    const Vocabulary tgt_vocab = Vocabulary::load(require(cfg, "tgt-vocab"));
    std::ifstream pf(cfg.get("input"));
    if (!pf) throw std::runtime_error("cannot read " + cfg.get("input"));
    std::vector<std::vector<int>> predicted;
    std::string line;
    while (std::getline(pf, line)) {
      std::istringstream ss(line);
      std::vector<int> ids;
      int v;
      while (ss >> v) ids.push_back(v);
      predicted.push_back(std::move(ids));
    }
    if (predicted.size() != refs.size())
      throw std::runtime_error("prediction file length does not match references");
    std::vector<std::vector<int>> targets;
    for (const auto& r : refs) {
      auto ids = tgt_vocab.encode(r);
      ids.push_back(Vocabulary::kEos);
      targets.push_back(std::move(ids));
    }
    const auto pr =
        wp_precision_recall(predicted, targets, cfg.get_bool("eval.include-eos"));
    report.add("wp_precision", pr.precision);
    report.add("wp_recall", pr.recall);
  }

  report.add("sentences", static_cast<double>(hyps.size()));
  if (cfg.get("report").empty()) std::cout << report.serialize();
  else open_out(cfg.get("report")) << report.serialize();
  return 0;
}

int cmd_predict_vocab(const RunConfig& cfg) {
  const Vocabulary src_vocab = Vocabulary::load(require(cfg, "src-vocab"));
  const auto model = load_model<float>(require(cfg, "model"));
  if (!model.has_wpe)
    throw std::runtime_error("checkpoint has no target-vocabulary predictor");
  if (model.dims.v_src != src_vocab.size())
    throw std::runtime_error("source vocabulary does not match the checkpoint");
  const int n = cfg.get_int("vocab-n");
  if (n < 1) throw std::invalid_argument("predict-vocab needs --vocab-n >= 1");

  const auto lines = read_token_lines(require(cfg, "input"));
  std::ostringstream body;
  for (const auto& toks : lines) {
    if (!toks.empty()) {
      const auto enc = encode<float>(nullptr, model.encoder, src_vocab.encode(toks));
      const auto ids = predict_vocabulary<float>(model, enc, n);
      for (std::size_t i = 0; i < ids.size(); ++i)
        body << (i ? " " : "") << ids[i];
    }
    body << "\n";
  }
  if (cfg.get("output").empty()) std::cout << body.str();
  else open_out(cfg.get("output")) << body.str();
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg) {
  const auto report = run_gradcheck_suite(cfg.get_u64("seed"));
  for (const auto& e : report.entries)
    std::cout << e.objective << " max_rel_err " << e.result.max_rel_err
              << " worst " << e.result.worst << "\n";
  std::cout << (report.pass ? "pass" : "FAIL") << " max_rel_err "
            << report.max_rel_err << "\n";
  return report.pass ? 0 : 1;
}

int cmd_synth(const RunConfig& cfg) {
  const SynthTask task = parse_synth_task(cfg.get("task"));
  const int vocab_size = cfg.get_int("vocab-size");
  const auto pairs =
      gen_synthetic(task, cfg.get_int("n"), vocab_size, cfg.get_int("len-lo"),
                    cfg.get_int("len-hi"), cfg.get_u64("seed"));
  const Vocabulary v = synthetic_vocab(vocab_size);
  auto src = open_out(require(cfg, "out-src"));
  auto tgt = open_out(require(cfg, "out-tgt"));
  for (const auto& p : pairs) {
    auto xs = v.decode(p.x);
    std::vector<int> y = p.y;
    if (!y.empty() && y.back() == Vocabulary::kEos) y.pop_back();
    auto ys = v.decode(y);
    for (std::size_t i = 0; i < xs.size(); ++i) src << (i ? " " : "") << xs[i];
    src << "\n";
    for (std::size_t i = 0; i < ys.size(); ++i) tgt << (i ? " " : "") << ys[i];
    tgt << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  try {
    if (args.empty()) {
      usage(std::cerr);
      return 1;
    }
    const std::string cmd = args[0];
    if (cmd == "--help" || cmd == "help") {
      usage(std::cout);
      return 0;
    }

    RunConfig cfg;
    std::vector<std::string> rest;
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == "--config") {
        if (i + 1 >= args.size())
          throw std::invalid_argument("--config needs a file path");
        cfg.load_file(args[++i]);
      } else {
        rest.push_back(args[i]);
      }
    }
    cfg.apply_args(rest);
    std::cerr << "resolved configuration:\n" << cfg.resolved();

    if (cmd == "train") return cmd_train(cfg);
    if (cmd == "translate") return cmd_translate(cfg);
    if (cmd == "evaluate") return cmd_evaluate(cfg);
    if (cmd == "predict-vocab") return cmd_predict_vocab(cfg);
    if (cmd == "gradcheck") return cmd_gradcheck(cfg);
    if (cmd == "synth") return cmd_synth(cfg);
    usage(std::cerr);
    throw std::invalid_argument("unknown command: " + cmd);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nmtwp
