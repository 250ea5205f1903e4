#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "hpbvp/cli.hpp"

using namespace hpbvp;
using namespace hpbvp::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hpbvp_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

json continuity_doc() {
  return json::parse(R"({
    "task": "continuity",
    "system": "advdiff1d",
    "grids": {"directions": [[1.0, 0.0]],
              "rho": {"min": 1e-6, "max": 1e-1, "count": 6, "scale": "log"}}
  })");
}

json certify_doc() {
  return json::parse(R"({
    "task": "certify",
    "system": "advdiff1d",
    "grids": {"directions": [[1.0, 0.0]], "rho": [0.0, 0.01, 0.1], "gamma_check": [0.0, 0.01, 0.1]},
    "constants": {"kappa": 2.0}
  })");
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int exit_status(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("axis values") {
  Axis lin{0.0, 1.0, 5, false, {}};
  CHECK(lin.values() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  Axis lg{1e-6, 1e-1, 6, true, {}};
  const auto v = lg.values();
  REQUIRE(v.size() == 6);
  CHECK(v.front() == 1e-6);
  CHECK(v.back() == 1e-1);
  CHECK(v[2] == doctest::Approx(1e-4));
}

TEST_CASE("continuity run writes one row per rho") {
  const auto dir = scratch("continuity");
  RunOptions o;
  o.output_dir = dir.string();
  o.workers = 2;
  const auto res = run(parse_config(continuity_doc()), o);
  CHECK(res.status == 0);
  const std::string table = slurp(res.table_path);
  CHECK(count_lines(table) == 7);
  CHECK(table.rfind("p_index,p0,p1,direction_index,tau_check,gamma_check,rho,gap,stable_dim,ok,error\n", 0) == 0);
  const json manifest = json::parse(slurp(res.manifest_path));
  CHECK(manifest["schema"] == kManifestSchema);
  CHECK(manifest["pass"] == true);
  CHECK(manifest["summary"]["sweeps"][0]["monotone"] == true);
}

TEST_CASE("identical configs give byte-identical tables") {
  const auto d1 = scratch("det1"), d2 = scratch("det2");
  RunOptions o1, o2;
  o1.output_dir = d1.string();
  o1.workers = 1;
  o2.output_dir = d2.string();
  o2.workers = 4;
  for (const json& doc : {continuity_doc(), certify_doc()}) {
    const auto cfg = parse_config(doc);
    const auto r1 = run(cfg, o1);
    const auto r2 = run(cfg, o2);
    CHECK(slurp(r1.table_path) == slurp(r2.table_path));
    if (!r1.certificate_path.empty()) CHECK(slurp(r1.certificate_path) == slurp(r2.certificate_path));
  }
}

TEST_CASE("config validation") {
  json doc = continuity_doc();
  doc["grids"]["rho"]["count"] = 0;
  CHECK(config_error(doc).find("grid count must be >= 1") != std::string::npos);
  CHECK(config_error(doc).find("grids.rho.count") == 0);

  doc = continuity_doc();
  doc["grids"]["rho"] = {{"min", -1.0}, {"max", 1.0}, {"count", 3}, {"scale", "log"}};
  CHECK(config_error(doc).find("positive bounds") != std::string::npos);

  doc = continuity_doc();
  doc["grids"]["directions"] = {{1.0, -0.5}};
  CHECK(config_error(doc).find("gamma_check must be >= 0") != std::string::npos);

  doc = continuity_doc();
  doc["task"] = "plot";
  CHECK(config_error(doc).find("task") == 0);

  doc = continuity_doc();
  doc["grids"]["p"] = {{1.0, -1.0}};
  CHECK(config_error(doc).find("outside the parameter domain") != std::string::npos);

  doc = continuity_doc();
  doc["tolerances"] = {{"no_such", 1.0}};
  CHECK(config_error(doc).find("unknown tolerance") != std::string::npos);
}

TEST_CASE("syntax errors carry line and column") {
  const auto dir = scratch("syntax");
  const std::string path = (dir / "bad.json").string();
  std::ofstream(path) << "{\n  \"task\": \"continuity\",\n  \"system\": ,\n}\n";
  try {
    load_config(path);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(path + ":3:") == 0);
  }
}

TEST_CASE("inline systems and angle directions") {
  const json doc = json::parse(R"({
    "task": "evans-scan",
    "system": {"N": 1, "d": 2, "A": [[[1.0]], [[0.5]]], "B": [[[1.0]], [[0.0]], [[0.0]], [[1.0]]]},
    "grids": {"directions": {"angles": [[0.0, 1.5707963267948966, 3.141592653589793], [0.0]]},
              "rho": [0.0, 0.1, 1.0]}
  })");
  const auto cfg = parse_config(doc);
  REQUIRE(cfg.directions.size() == 3);
  CHECK(cfg.directions[0].tau == 1.0);
  CHECK(cfg.directions[0].gamma == 0.0);
  CHECK(cfg.directions[1].eta(0) == doctest::Approx(1.0));
  CHECK(cfg.directions[1].gamma == 0.0);
  CHECK(cfg.directions[2].tau == -1.0);
  const auto dir = scratch("inline");
  RunOptions o;
  o.output_dir = dir.string();
  const auto res = run(cfg, o);
  CHECK(res.status == 0);
  CHECK(count_lines(slurp(res.table_path)) == 10);
}

TEST_CASE("certificate round trip and injected defects") {
  const auto dir = scratch("cert");
  RunOptions o;
  o.output_dir = dir.string();
  const auto res = run(parse_config(certify_doc()), o);
  REQUIRE(res.status == 0);
  REQUIRE(!res.certificate_path.empty());
  const json cert = json::parse(slurp(res.certificate_path));
  CHECK(cert["schema"] == kCertificateSchema);
  for (const auto& m : cert["margins"]) {
    CHECK(m["margin_hermitian"].get<double>() >= 0.0);
    CHECK(m["margin_cone"].get<double>() >= -1e-10);
  }

  const auto fresh = replay_certificate(cert);
  CHECK(fresh.pass);
  CHECK(replay_certificate_file(res.certificate_path).pass);

  json skew = cert;
  auto& entry = skew["S"][4][0][1];
  entry[0] = entry[0].get<double>() + 1e-3;
  const auto r1 = replay_certificate(skew);
  CHECK_FALSE(r1.pass);
  REQUIRE(!r1.failures.empty());
  CHECK(r1.failures.front().find("hermiticity at grid point 4") == 0);

  json inflated = cert;
  inflated["kappa"] = 100.0 * cert["kappa"].get<double>();
  const auto r2 = replay_certificate(inflated);
  CHECK_FALSE(r2.pass);
  REQUIRE(!r2.failures.empty());
  CHECK(r2.failures.front().find("cone") == 0);

  json broken = cert;
  broken.erase("S");
  CHECK_THROWS_AS(replay_certificate(broken), ConfigError);
  json wrong = cert;
  wrong["schema"] = "other/9";
  CHECK_THROWS_AS(replay_certificate(wrong), ConfigError);
}

TEST_CASE("task failures report status 1 with the failing point") {
  const json doc = json::parse(R"({
    "task": "certify",
    "system": "advdiff1d",
    "grids": {"directions": [[1.0, 0.0]], "rho": [0.0, 0.1], "gamma_check": [0.0]},
    "constants": {"kappa": 10.0}
  })");
  const auto dir = scratch("fail");
  RunOptions o;
  o.output_dir = dir.string();
  const auto res = run(parse_config(doc), o);
  CHECK(res.status == 1);
  const json manifest = json::parse(slurp(res.manifest_path));
  CHECK(manifest["pass"] == false);
  CHECK(manifest["failure"]["reason"].get<std::string>().find("grid point") != std::string::npos);
}

TEST_CASE("numbers use 17 significant digits and CSV quoting") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(1.0) == "1");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"x\"") == "\"say \"\"x\"\"\"");
  CHECK(csv_escape("q\"x,") == "\"q\"\"x,\"");
}

TEST_CASE("executable exit codes") {
  const std::string exe = HPBVP_CLI_PATH;
  const auto dir = scratch("exe");
  const std::string good = (dir / "good.json").string();
  std::ofstream(good) << continuity_doc().dump();
  json bad_doc = continuity_doc();
  bad_doc["grids"]["rho"]["count"] = 0;
  const std::string bad = (dir / "bad.json").string();
  std::ofstream(bad) << bad_doc.dump();
  const std::string out = (dir / "out").string();
  CHECK(exit_status(exe + " run " + good + " --output-dir " + out) == 0);
  CHECK(exit_status(exe + " run " + bad + " --output-dir " + out) == 2);
  CHECK(exit_status(exe + " run " + good + " --output-dir " + out + " --tolerance nope=1") == 2);
  CHECK(exit_status(exe + " run " + good + " --output-dir " + out + " --tolerance gap_max=1e-9") == 1);
  CHECK(exit_status(exe + " replay " + (dir / "missing.json").string()) == 2);
}
