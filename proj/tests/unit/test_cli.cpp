#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aloha/cli.hpp"
#include "aloha/io.hpp"

namespace {

namespace fs = std::filesystem;
using aloha::io::json;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = aloha::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream o(p, std::ios::binary);
  o << text;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("aloha_cli_" + tag + "_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

const std::string kConfigs = ALOHA_CONFIGS_DIR;

std::string realization(const std::string& nodes) {
  return R"({"format":"aloha.realization","version":1,"seed":1,"L":10,"r0":1,"nodes":[)" + nodes + "]}";
}

}  // namespace

TEST_CASE("cli: missing subcommand and unknown options are usage errors") {
  CHECK(cli({}).code == aloha::kExitUsage);
  CHECK(cli({"generate", "--bogus"}).code == aloha::kExitUsage);
  CHECK(cli({"generate", "--format", "xml"}).code == aloha::kExitUsage);
  CHECK(cli({"--help"}).code == aloha::kExitOk);
}

TEST_CASE("cli generate: zero intensity gives an empty node list") {
  TempDir d("gen0");
  spit(d / "c.json", R"({"seed":3,"model":{"intensity":0,"region_side":10}})");
  const Run r = cli({"generate", "--config", d / "c.json"});
  REQUIRE(r.code == aloha::kExitOk);
  const json j = json::parse(r.out);
  CHECK(j["nodes"].is_array());
  CHECK(j["nodes"].empty());
}

TEST_CASE("cli generate: seeds reproduce and the written file round-trips byte for byte") {
  TempDir d("genseed");
  spit(d / "c.json", R"({"model":{"intensity":0.25,"region_side":8}})");
  const Run a = cli({"generate", "--config", d / "c.json", "--seed", "11"});
  const Run b = cli({"generate", "--config", d / "c.json", "--seed", "11"});
  const Run c = cli({"generate", "--config", d / "c.json", "--seed", "12"});
  REQUIRE(a.code == aloha::kExitOk);
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);

  REQUIRE(cli({"generate", "--config", d / "c.json", "--seed", "11", "--out", d / "r.json"}).code == 0);
  CHECK(slurp(d / "r.json") == a.out);
  CHECK(fs::exists(d / "r.json.manifest.json"));
  const auto net = aloha::io::realization_from_json(aloha::io::read_json_file(d / "r.json"));
  CHECK(aloha::io::dump(aloha::io::to_json(net)) == a.out);
}

TEST_CASE("cli optimize: a lone node transmits always") {
  TempDir d("opt1");
  spit(d / "one.json", realization(R"({"x":1,"y":1,"phi":0})"));
  const Run r = cli({"optimize", "--input", d / "one.json", "--scheme", "PF-AI"});
  REQUIRE(r.code == aloha::kExitOk);
  const json j = json::parse(r.out);
  REQUIRE(j["report"]["p"].size() == 1);
  CHECK(j["report"]["p"][0].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("cli optimize: MT-AI never beats the brute-force optimum") {
  TempDir d("opt3");
  spit(d / "three.json",
       realization(R"({"x":1,"y":1,"phi":0},{"x":1.6,"y":1.2,"phi":2},{"x":2.5,"y":0.4,"phi":4})"));
  const Run bf = cli({"optimize", "--input", d / "three.json", "--scheme", "MT-BF"});
  const Run ai = cli({"optimize", "--input", d / "three.json", "--scheme", "MT-AI"});
  REQUIRE(bf.code == aloha::kExitOk);
  REQUIRE(ai.code != aloha::kExitUsage);
  const double best = json::parse(bf.out)["rates"]["aggregate"].get<double>();
  const double got = json::parse(ai.out)["rates"]["aggregate"].get<double>();
  CHECK(got <= best + 1e-9);
}

TEST_CASE("cli optimize: unknown scheme and missing input are usage errors") {
  TempDir d("optbad");
  spit(d / "one.json", realization(R"({"x":1,"y":1,"phi":0})"));
  CHECK(cli({"optimize", "--input", d / "one.json", "--scheme", "XX"}).code == aloha::kExitUsage);
  CHECK(cli({"optimize", "--scheme", "PF-AI"}).code == aloha::kExitUsage);
}

TEST_CASE("cli analyze: ccdf at rho 0 is one") {
  TempDir d("ana");
  spit(d / "c.json", R"({"quadrature":{"rho_grid":[0,0.5]}})");
  const Run r = cli({"analyze", "--config", d / "c.json", "--target", "curve", "--format", "json"});
  REQUIRE(r.code == aloha::kExitOk);
  const json j = json::parse(r.out);
  const json& curve = j["curve"];
  REQUIRE(curve.contains("ccdf"));
  CHECK(curve["ccdf"][0].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("cli analyze: laplace routes alpha4 and generic agree") {
  const std::string cfg = kConfigs + "/analyze_laplace.json";
  const Run g = cli({"analyze", "--config", cfg, "--route", "generic", "--format", "json"});
  const Run a = cli({"analyze", "--config", cfg, "--route", "alpha4", "--format", "json"});
  REQUIRE(g.code == aloha::kExitOk);
  REQUIRE(a.code == aloha::kExitOk);
  const json jg = json::parse(g.out)["values"];
  const json ja = json::parse(a.out)["values"];
  REQUIRE(jg.size() == ja.size());
  REQUIRE(!jg.empty());
  for (std::size_t k = 0; k < jg.size(); ++k)
    for (int c = 0; c < 2; ++c)
      CHECK(std::abs(jg[k]["value"][c].get<double>() - ja[k]["value"][c].get<double>()) < 1e-6);
}

TEST_CASE("cli analyze: mean utility reports both terms") {
  const Run r = cli({"analyze", "--config", kConfigs + "/smoke.json", "--target", "mean-utility", "--format", "json"});
  REQUIRE(r.code == aloha::kExitOk);
  const json j = json::parse(r.out);
  const double a = j["log_map_term"].get<double>();
  const double b = j["interference_term"].get<double>();
  const double t = j["tail"].get<double>();
  CHECK(a < 0.0);
  CHECK(b < 0.0);
  CHECK(t <= 0.0);
  CHECK(t >= b);
  CHECK(j["total"].get<double>() == doctest::Approx(a + b).epsilon(1e-12));
}

TEST_CASE("cli analyze: route applies only to the laplace target") {
  CHECK(cli({"analyze", "--target", "curve", "--route", "generic"}).code == aloha::kExitUsage);
}

TEST_CASE("cli experiment: smoke config finishes and reruns byte-identically") {
  TempDir d("exp");
  const auto t0 = std::chrono::steady_clock::now();
  const Run a = cli({"experiment", "--config", kConfigs + "/smoke.json", "--out", d / "a"});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(a.code == aloha::kExitOk);
  CHECK(secs < 60.0);
  for (const char* f : {"summary.json", "config.json", "manifest.json", "failures.csv"})
    CHECK(fs::exists(d.path / "a" / f));
  REQUIRE(cli({"experiment", "--config", kConfigs + "/smoke.json", "--out", d / "b", "--threads", "2"}).code == 0);
  CHECK(slurp(d.path / "a" / "summary.json") == slurp(d.path / "b" / "summary.json"));
  CHECK(slurp(d.path / "a" / "throughput_sweep.csv") == slurp(d.path / "b" / "throughput_sweep.csv"));
}

TEST_CASE("cli experiment: optimizer failures are recorded and exit numerically") {
  TempDir d("fail");
  const Run r = cli({"experiment", "--config", kConfigs + "/failure_injection.json", "--out", d / "o"});
  CHECK(r.code == aloha::kExitNumerical);
  const std::string rows = slurp(d.path / "o" / "failures.csv");
  std::size_t lines = 0;
  for (char ch : rows) lines += ch == '\n';
  CHECK(lines >= 2);
  CHECK(rows.find("did not converge") != std::string::npos);
}

TEST_CASE("cli validate: listing, unknown presets and a reduced criterion run") {
  const Run l = cli({"validate", "--list"});
  REQUIRE(l.code == aloha::kExitOk);
  CHECK(l.out.find("cdf-lambda-0.25") != std::string::npos);
  CHECK(l.out.find("determinism") != std::string::npos);
  CHECK(cli({"validate", "nope"}).code == aloha::kExitUsage);
  CHECK(cli({"validate"}).code == aloha::kExitUsage);

  TempDir d("val");
  spit(d / "v.json", R"({"n_realizations":5})");
  const Run r = cli({"validate", "cdf-lambda-0.25", "--config", d / "v.json", "--out", d / "rep.json"});
  REQUIRE(r.code != aloha::kExitUsage);
  const json rep = aloha::io::read_json_file(d / "rep.json");
  REQUIRE(rep.size() == 1);
  CHECK(rep[0]["metrics"].contains("kolmogorov"));
  CHECK(rep[0]["passed"].get<bool>() == (r.code == aloha::kExitOk));
  CHECK(r.out.find("kolmogorov=") != std::string::npos);
}

TEST_CASE("cli config: unknown fields and malformed files are usage errors") {
  TempDir d("cfg");
  spit(d / "b.json", R"({"bogus":1})");
  spit(d / "m.json", R"({"model":{"intensity":"x"}})");
  spit(d / "t.json", "{ not json");
  CHECK(cli({"generate", "--config", d / "b.json"}).code == aloha::kExitUsage);
  CHECK(cli({"generate", "--config", d / "m.json"}).code == aloha::kExitUsage);
  CHECK(cli({"generate", "--config", d / "t.json"}).code == aloha::kExitUsage);
  CHECK(cli({"generate", "--config", d / "missing.json"}).code == aloha::kExitUsage);
  spit(d / "v.json", R"({"n_realizations":5,"x":1})");
  CHECK(cli({"validate", "pf-limit", "--config", d / "v.json"}).code == aloha::kExitUsage);
}
