#include <doctest.h>

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "rdstack/error.hpp"
#include "rdstack/storage.hpp"
#include "support.hpp"

using namespace rdstack;
namespace fs = std::filesystem;

namespace {

Simulation float_simulation(std::uint64_t seed, int steps, int h, int w, const std::string& id) {
  Simulation sim = testing::random_simulation(seed, steps, h, w, id);
  for (State& s : sim.states) {
    for (StateMap& m : s) {
      for (double& v : m.values()) v = static_cast<float>(v);
    }
  }
  return sim;
}

template <typename T>
void write_raw(const fs::path& path, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(T)));
}

}  // namespace

TEST_CASE("step file names") {
  CHECK(storage::step_file_name(0) == "step_00000.bin");
  CHECK(storage::step_file_name(123) == "step_00123.bin");
}

TEST_CASE("simulation round-trip is exact for float-representable data") {
  testing::TempDir tmp("storage");
  const Simulation sim = float_simulation(1, 4, 6, 5, "a");
  storage::write_simulation(tmp.path() / "a", sim);
  CHECK(storage::read_simulation(tmp.path() / "a") == sim);
  CHECK_THROWS_AS(storage::write_simulation(tmp.path() / "a", sim), Error);
  storage::write_simulation(tmp.path() / "a", sim, true);
}

TEST_CASE("ensemble round-trip keeps the split") {
  testing::TempDir tmp("ensemble");
  Ensemble e;
  for (int i = 0; i < 4; ++i) e.simulations.push_back(float_simulation(i, 3, 4, 4, "sim" + std::to_string(i)));
  e = split_ensemble(e, 3, 9);
  storage::write_ensemble(tmp.path() / "data", e);
  const Ensemble back = storage::read_ensemble(tmp.path() / "data");
  CHECK(back.split == e.split);
  REQUIRE(back.simulations.size() == 4);
  for (const Simulation& s : e.simulations) {
    bool found = false;
    for (const Simulation& b : back.simulations) found |= (b == s);
    CHECK(found);
  }
}

TEST_CASE("missing or truncated files are io or data errors") {
  testing::TempDir tmp("broken");
  CHECK_THROWS_AS(storage::read_simulation(tmp.path() / "nothing"), Error);
  const Simulation sim = float_simulation(2, 2, 4, 4, "b");
  storage::write_simulation(tmp.path() / "b", sim);
  fs::resize_file(tmp.path() / "b" / storage::step_file_name(1), 10);
  try {
    storage::read_simulation(tmp.path() / "b");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK((e.category() == ErrorCategory::io || e.category() == ErrorCategory::data));
  }
}

TEST_CASE("import maps external channel order, dtype and crop") {
  testing::TempDir tmp("import");
  const fs::path src = tmp.path() / "src";
  const int h = 6, w = 8, steps = 3;
  const std::size_t plane = static_cast<std::size_t>(h * w);
  // External order: Uy, conc, Ux, porosity.
  nlohmann::json manifest = {{"height", h},
                             {"width", w},
                             {"steps", steps},
                             {"dtype", "float64"},
                             {"file_pattern", "t{step}.raw"},
                             {"step_digits", 3},
                             {"channels", {"Uy", "conc", "Ux", "porosity"}},
                             {"channel_map", {{"conc", "C"}, {"porosity", "eps"}}},
                             {"simulations", {{{"id", "r1"}, {"split", "train"}}, {{"id", "r2"}, {"split", "validation"}}}}};
  fs::create_directories(src);
  storage::write_text(src / "import.json", manifest.dump());
  for (const std::string id : {"r1", "r2"}) {
    fs::create_directories(src / id);
    for (int t = 0; t < steps; ++t) {
      std::vector<double> values(4 * plane);
      for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t k = 0; k < plane; ++k) values[c * plane + k] = 0.125 * static_cast<double>(c) + 0.001 * k + 0.1 * t;
      }
      char name[32];
      std::snprintf(name, sizeof(name), "t%03d.raw", t);
      write_raw(src / id / name, values);
    }
  }
  storage::ImportOptions opt;
  opt.crop_h = 4;
  opt.crop_w = 4;
  storage::import_ensemble(src, tmp.path() / "dst", opt);
  const Ensemble e = storage::read_ensemble(tmp.path() / "dst");
  REQUIRE(e.simulations.size() == 2);
  CHECK(e.split.at("r1") == Split::train);
  CHECK(e.split.at("r2") == Split::validation);
  const Simulation& s = e.simulations.front();
  CHECK(s.height() == 4);
  CHECK(s.width() == 4);
  // Native (row 0, col 0) was external (1, 2), flat index 1 * 8 + 2 = 10.
  const double at10 = 0.001 * 10;
  CHECK(s.map(1, Channel::C)(0, 0) == static_cast<float>(0.125 * 1 + at10 + 0.1));
  CHECK(s.map(1, Channel::Eps)(0, 0) == static_cast<float>(0.125 * 3 + at10 + 0.1));
  CHECK(s.map(1, Channel::Ux)(0, 0) == static_cast<float>(0.125 * 2 + at10 + 0.1));
  CHECK(s.map(1, Channel::Uy)(0, 0) == static_cast<float>(0.0 + at10 + 0.1));
}

TEST_CASE("import rejects a manifest without all physical channels") {
  testing::TempDir tmp("import-bad");
  nlohmann::json manifest = {{"height", 2},          {"width", 2},  {"steps", 1}, {"file_pattern", "{step}.bin"},
                             {"channels", {"C", "eps", "Ux"}}, {"simulations", nlohmann::json::array()}};
  storage::write_text(tmp.path() / "import.json", manifest.dump());
  CHECK_THROWS_AS(storage::import_ensemble(tmp.path(), tmp.path() / "out", {}), Error);
}
