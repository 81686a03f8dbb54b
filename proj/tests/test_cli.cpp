#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nmtwp/checkpoint.hpp"
#include "nmtwp/cli.hpp"
#include "nmtwp/decoding.hpp"
#include "nmtwp/vocab.hpp"

using namespace nmtwp;
namespace fs = std::filesystem;

namespace {

// run_cli chats on both streams; keep test output readable.
struct Quiet {
  std::streambuf* out;
  std::streambuf* err;
  std::ostringstream captured_out, captured_err;
  Quiet()
      : out(std::cout.rdbuf(captured_out.rdbuf())),
        err(std::cerr.rdbuf(captured_err.rdbuf())) {}
  ~Quiet() {
    std::cout.rdbuf(out);
    std::cerr.rdbuf(err);
  }
};

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  Quiet q;
  const int rc = run_cli(args);
  if (out) *out = q.captured_out.str();
  return rc;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

struct Workspace {
  std::string dir;
  explicit Workspace(const std::string& tag) {
    dir = "/tmp/nmtwp_cli_" + tag + "_" + std::to_string(::getpid());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string operator/(const std::string& name) const { return dir + "/" + name; }
};

// One tiny synthetic corpus + base training run shared by the suite.
struct Fixture {
  Workspace ws{"fix"};
  std::string src = ws / "c.src", tgt = ws / "c.tgt";
  std::string run = ws / "run";

  Fixture() {
    REQUIRE(cli({"synth", "--task", "copy", "--n", "40", "--vocab-size", "12",
                 "--len-lo", "2", "--len-hi", "4", "--seed", "11", "--out-src",
                 src, "--out-tgt", tgt}) == 0);
    REQUIRE(cli({"train", "--train-src", src, "--train-tgt", tgt, "--out", run,
                 "--epochs", "2", "--batch", "8", "--vocab-size", "12",
                 "--dim.emb", "6", "--dim.hid", "8", "--dim.att", "8",
                 "--dim.readout", "6", "--dropout", "0.0", "--seed", "3"}) == 0);
  }
  std::string ckpt() const { return run + "/epoch_2.ckpt"; }
  std::string sv() const { return run + "/vocab.src.tsv"; }
  std::string tv() const { return run + "/vocab.tgt.tsv"; }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("synthetic corpora are reproducible and task-shaped") {
  Workspace ws("synth");
  auto run = [&](const std::string& tag, const std::string& task) {
    REQUIRE(cli({"synth", "--task", task, "--n", "25", "--vocab-size", "14",
                 "--len-lo", "2", "--len-hi", "5", "--seed", "7", "--out-src",
                 ws / (tag + ".src"), "--out-tgt", ws / (tag + ".tgt")}) == 0);
  };
  run("a", "reverse");
  run("b", "reverse");
  CHECK(slurp(ws / "a.src") == slurp(ws / "b.src"));
  CHECK(slurp(ws / "a.tgt") == slurp(ws / "b.tgt"));

  std::ifstream s(ws / "a.src"), t(ws / "a.tgt");
  std::string ls, lt;
  int lines = 0;
  while (std::getline(s, ls) && std::getline(t, lt)) {
    ++lines;
    std::istringstream a(ls), b(lt);
    std::vector<std::string> xs, ys;
    std::string w;
    while (a >> w) xs.push_back(w);
    while (b >> w) ys.push_back(w);
    std::reverse(ys.begin(), ys.end());
    CHECK(xs == ys);
  }
  CHECK(lines == 25);
}

TEST_CASE("training writes checkpoints, vocabularies and a parsable loss log") {
  auto& f = fixture();
  CHECK(fs::exists(f.ckpt()));
  CHECK(fs::exists(f.run + "/config.resolved"));
  const std::string log = slurp(f.run + "/loss.log");
  CHECK(log.rfind("# epoch", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);
  const Vocabulary v = Vocabulary::load(f.tv());
  CHECK(v.size() == 12);
}

TEST_CASE("beam one translation equals in-process greedy decoding") {
  auto& f = fixture();
  Workspace ws("greedy");
  REQUIRE(cli({"translate", "--model", f.ckpt(), "--src-vocab", f.sv(),
               "--tgt-vocab", f.tv(), "--input", f.src, "--output",
               ws / "out.txt", "--beam", "1"}) == 0);

  const auto model = load_model<float>(f.ckpt());
  const Vocabulary sv = Vocabulary::load(f.sv());
  const Vocabulary tv = Vocabulary::load(f.tv());
  std::ifstream in(f.src), out(ws / "out.txt");
  std::string src_line, out_line;
  while (std::getline(in, src_line) && std::getline(out, out_line)) {
    std::istringstream ss(src_line);
    std::vector<std::string> toks;
    std::string w;
    while (ss >> w) toks.push_back(w);
    auto r = greedy_decode(model, sv.encode(toks));
    const auto want = tv.decode(r.ids);
    std::string joined;
    for (std::size_t i = 0; i < want.size(); ++i) joined += (i ? " " : "") + want[i];
    CHECK(out_line == joined);
  }
}

TEST_CASE("full-size predicted vocabulary changes nothing") {
  auto& f = fixture();
  Workspace ws("vocabn");
  // A predictor head is needed for restricted decoding.
  REQUIRE(cli({"train", "--train-src", f.src, "--train-tgt", f.tgt, "--out",
               ws / "l1", "--objective", "L1", "--epochs", "1", "--batch", "8",
               "--vocab-size", "12", "--dim.emb", "6", "--dim.hid", "8",
               "--dim.att", "8", "--dim.readout", "6", "--dropout", "0.0",
               "--seed", "3"}) == 0);
  const std::string ckpt = (ws / "l1") + "/epoch_1.ckpt";
  auto translate = [&](const std::string& out,
                       const std::vector<std::string>& extra) {
    std::vector<std::string> args = {"translate", "--model", ckpt,
                                     "--src-vocab", f.sv(), "--tgt-vocab", f.tv(),
                                     "--input", f.src, "--output", out,
                                     "--beam", "3"};
    args.insert(args.end(), extra.begin(), extra.end());
    REQUIRE(cli(args) == 0);
  };
  translate(ws / "plain.txt", {});
  translate(ws / "full.txt", {"--vocab-n", "12"});
  CHECK(slurp(ws / "plain.txt") == slurp(ws / "full.txt"));

  SUBCASE("restriction needs the predictor head") {
    std::vector<std::string> args = {"translate", "--model", f.ckpt(),
                                     "--src-vocab", f.sv(), "--tgt-vocab", f.tv(),
                                     "--input", f.src, "--output", ws / "x.txt",
                                     "--beam", "3", "--vocab-n", "4"};
    CHECK(cli(args) == 1);
  }

  SUBCASE("restricted run emits a timing report") {
    translate(ws / "r.txt", {"--vocab-n", "6", "--timing", ws / "t.txt"});
    int sentences = 0, vn = -1;
    double tot = 0, proj = 0;
    REQUIRE(std::sscanf(slurp(ws / "t.txt").c_str(), "%d\t%lf\t%lf\t%d",
                        &sentences, &tot, &proj, &vn) == 4);
    CHECK(sentences == 40);
    CHECK(vn == 6);
    CHECK(tot >= proj);
  }
}

TEST_CASE("a duplicated ensemble member decodes like the single model") {
  auto& f = fixture();
  Workspace ws("ens");
  auto translate = [&](const std::string& out,
                       const std::vector<std::string>& model_args) {
    std::vector<std::string> args = {"translate", "--src-vocab", f.sv(),
                                     "--tgt-vocab", f.tv(), "--input", f.src,
                                     "--output", out, "--beam", "2"};
    args.insert(args.end(), model_args.begin(), model_args.end());
    REQUIRE(cli(args) == 0);
  };
  translate(ws / "one.txt", {"--model", f.ckpt()});
  translate(ws / "two.txt", {"--ensemble", f.ckpt(), f.ckpt()});
  CHECK(slurp(ws / "one.txt") == slurp(ws / "two.txt"));
}

TEST_CASE("evaluation of identical files reports a perfect score") {
  auto& f = fixture();
  Workspace ws("eval");
  REQUIRE(cli({"evaluate", "--hyp", f.tgt, "--ref", f.tgt, "--report",
               ws / "r.tsv"}) == 0);
  const std::string rep = slurp(ws / "r.tsv");
  CHECK(rep.find("bleu\t100.000000\n") != std::string::npos);
  CHECK(rep.find("token_accuracy\t1.000000\n") != std::string::npos);
  CHECK(rep.find("sentences\t40.000000\n") != std::string::npos);
}

TEST_CASE("predicted vocabularies are ascending and include the reserved ids") {
  auto& f = fixture();
  Workspace ws("pv");
  REQUIRE(cli({"train", "--train-src", f.src, "--train-tgt", f.tgt, "--out",
               ws / "l1", "--objective", "L1", "--epochs", "1", "--batch", "8",
               "--vocab-size", "12", "--dim.emb", "6", "--dim.hid", "8",
               "--dim.att", "8", "--dim.readout", "6", "--dropout", "0.0",
               "--seed", "9"}) == 0);
  REQUIRE(cli({"predict-vocab", "--model", (ws / "l1") + "/epoch_1.ckpt",
               "--src-vocab", f.sv(), "--input", f.src, "--vocab-n", "2",
               "--output", ws / "pv.txt"}) == 0);
  std::ifstream pf(ws / "pv.txt");
  std::string line;
  int lines = 0;
  while (std::getline(pf, line)) {
    ++lines;
    std::istringstream ss(line);
    std::vector<int> ids;
    int v;
    while (ss >> v) ids.push_back(v);
    REQUIRE(ids.size() >= 4);
    CHECK(ids.size() <= 6);
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    for (int r = 0; r < 4; ++r) CHECK(std::count(ids.begin(), ids.end(), r) == 1);
  }
  CHECK(lines == 40);
}

TEST_CASE("config files feed commands and overrides win") {
  Workspace ws("cfg");
  std::ofstream(ws / "exp.cfg") << "task = copy\nn = 5\nvocab-size = 9\n"
                                   "len-lo = 2\nlen-hi = 2\nseed = 4\n";
  REQUIRE(cli({"synth", "--config", ws / "exp.cfg", "--n", "7", "--out-src",
               ws / "s", "--out-tgt", ws / "t"}) == 0);
  const std::string body = slurp(ws / "s");
  CHECK(std::count(body.begin(), body.end(), '\n') == 7);
}

TEST_CASE("failures exit nonzero with a diagnostic") {
  CHECK(cli({}) == 1);
  CHECK(cli({"help"}) == 0);
  CHECK(cli({"no-such-command"}) == 1);
  CHECK(cli({"synth", "--wat", "1"}) == 1);
  CHECK(cli({"train"}) == 1);  // missing --out
  CHECK(cli({"translate", "--model", "/tmp/definitely_missing.ckpt",
             "--src-vocab", fixture().sv(), "--tgt-vocab", fixture().tv(),
             "--input", fixture().src, "--output", "/tmp/x"}) == 1);
  std::string out;
  CHECK(cli({"evaluate", "--hyp", fixture().src, "--ref", fixture().tgt},
            &out) == 0);
  CHECK(out.find("bleu") != std::string::npos);
}
