#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qslin/config.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "qslin_test_cli";

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path log = kWork / "stdout.txt";
  const std::string cmd = std::string(QSLIN_CLI) + " " + args + " > " + log.string() + " 2> " +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  r.out = ss.str();
  return r;
}

std::string stderr_text() {
  std::ifstream f(kWork / "stderr.txt");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  const fs::path p = kWork / name;
  fs::create_directories(kWork);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("analyze and kappa succeed on the builtin manipulator") {
  auto r = run("analyze builtin:manipulator --json");
  CHECK(r.code == 0);
  const auto a = nlohmann::json::parse(r.out);
  CHECK(a["generalized"]["R"] == nlohmann::json({4, 4, 4}));
  CHECK(a["structure"]["pass"] == true);
  r = run("kappa builtin:manipulator --json");
  CHECK(r.code == 0);
  const auto k = nlohmann::json::parse(r.out);
  REQUIRE(k["candidates"].size() == 2);
  CHECK(k["candidates"][1]["kappa"] == nlohmann::json({0, 2, 4}));
  r = run("kappa builtin:manipulator");
  CHECK(r.code == 0);
  CHECK(r.out.find("kappa: [0,2,4]") != std::string::npos);
}

TEST_CASE("identical runs give identical JSON") {
  const auto a = run("kappa builtin:manipulator --json");
  const auto b = run("kappa builtin:manipulator --json");
  CHECK(a.out == b.out);
}

TEST_CASE("config prints a re-parsable effective config") {
  const auto r = run("config builtin:toy");
  CHECK(r.code == 0);
  CHECK(qslin::parse_config(r.out) == qslin::resolve_config("builtin:toy"));
}

TEST_CASE("validation failures exit with 2") {
  CHECK(run("analyze /no/such/file.cfg").code == 2);
  CHECK(run("frobnicate builtin:toy").code == 2);
  CHECK(run("simulate builtin:manipulator --kappa 9 --out " + (kWork / "k9").string()).code == 2);
  CHECK(stderr_text().find("valid selectors") != std::string::npos);
  CHECK(run("simulate builtin:manipulator --dt -1 --out " + (kWork / "neg").string()).code == 2);
  CHECK(run("simulate builtin:manipulator --strategy guess --out " + (kWork / "sg").string()).code == 2);
  CHECK(run("plan builtin:manipulator --from start --to nowhere --out " + (kWork / "pn").string()).code == 2);
  const auto bad = write_config("bad.cfg", qslin::builtin_config_text("toy"), "[system]", "[system]\nfoo = 1");
  CHECK(run("analyze " + bad.string()).code == 2);
  CHECK(stderr_text().find("bad.cfg:") != std::string::npos);
}

TEST_CASE("a parameterization that fails certification exits with 3") {
  const auto p = write_config("uncertified.cfg", qslin::builtin_config_text("manipulator"), "Fq[3] = \"y3\"",
                              "Fq[3] = \"y3 + 0.01*y1\"");
  CHECK(run("analyze " + p.string()).code == 3);
}

TEST_CASE("a solver breakdown exits with 4 and names the time") {
  auto text = qslin::builtin_config_text("manipulator");
  const auto p = write_config("drop.cfg", text, "end = 1, 0.5, 0.4", "end = 0, -5, 0");
  const auto r = run("simulate " + p.string() + " --kappa 2 --T 1 --out " + (kWork / "drop").string());
  CHECK(r.code == 4);
  CHECK(stderr_text().find("at t = ") != std::string::npos);
}

TEST_CASE("simulate and plan write their outputs") {
  const auto dir = kWork / "sim";
  fs::remove_all(dir);
  auto r = run("simulate builtin:manipulator --kappa 0,2,4 --T 2 --out " + dir.string() + " --json");
  REQUIRE(r.code == 0);
  const auto rep = nlohmann::json::parse(r.out);
  CHECK(rep["kappa"] == nlohmann::json({0, 2, 4}));
  CHECK(rep["T"] == 2.0);
  CHECK(rep["linearization"]["pass"] == true);
  std::ifstream mf(dir / "manifest.json");
  const auto manifest = nlohmann::json::parse(mf);
  CHECK(manifest["files"].size() == 6);
  for (const auto& f : manifest["files"]) CHECK(fs::exists(dir / f["path"].get<std::string>()));

  const auto pdir = kWork / "plan";
  r = run("plan builtin:toy --from start --to end --out " + pdir.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(pdir / "plan.json"));
  CHECK(fs::exists(pdir / "reference.csv"));
  fs::remove_all(kWork);
}
