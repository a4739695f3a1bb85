#include "rdstack/storage.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rdstack/error.hpp"

namespace rdstack::storage {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "on-disk arrays are little-endian");

std::string step_file_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%05d.bin", step);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write " + tmp.string());
    out << text;
    if (!out) fail(ErrorCategory::io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCategory::data, path.string() + ": " + e.what());
  }
}

std::vector<char> read_bytes(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  std::vector<char> bytes(expected);
  in.read(bytes.data(), static_cast<std::streamsize>(expected));
  if (static_cast<std::size_t>(in.gcount()) != expected || in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorCategory::data, path.string() + " does not hold exactly " + std::to_string(expected) + " bytes");
  }
  return bytes;
}

std::vector<double> decode(const std::vector<char>& bytes, const std::string& dtype) {
  std::vector<double> out;
  if (dtype == "float32") {
    out.resize(bytes.size() / sizeof(float));
    for (std::size_t i = 0; i < out.size(); ++i) {
      float v;
      std::memcpy(&v, bytes.data() + i * sizeof(float), sizeof(float));
      out[i] = static_cast<double>(v);
    }
  } else if (dtype == "float64") {
    out.resize(bytes.size() / sizeof(double));
    std::memcpy(out.data(), bytes.data(), out.size() * sizeof(double));
  } else {
    fail(ErrorCategory::data, "unsupported dtype '" + dtype + "'");
  }
  return out;
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "float32") return 4;
  if (dtype == "float64") return 8;
  fail(ErrorCategory::data, "unsupported dtype '" + dtype + "'");
}

void prepare_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir)) {
    if (!overwrite) fail(ErrorCategory::io, dir.string() + " already exists (pass overwrite to replace)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

}  // namespace

void write_simulation(const fs::path& dir, const Simulation& sim, bool overwrite) {
  const ValidationReport report = validate_simulation(sim);
  if (!report.ok()) fail(ErrorCategory::data, "refusing to write invalid simulation " + sim.id + ": " + report.summary());
  prepare_dir(dir, overwrite);

  const int h = sim.height();
  const int w = sim.width();
  json manifest;
  manifest["format"] = "rdstack-simulation";
  manifest["version"] = 1;
  manifest["id"] = sim.id;
  manifest["height"] = h;
  manifest["width"] = w;
  manifest["steps"] = sim.steps();
  manifest["dt_index"] = sim.dt_index;
  manifest["dtype"] = "float32";
  manifest["layout"] = "channel-major";
  json channels = json::array();
  for (Channel c : sim.channels) channels.push_back(std::string(channel_name(c)));
  manifest["channels"] = channels;

  std::vector<float> buffer(sim.channels.size() * static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (int step = 0; step < sim.steps(); ++step) {
    std::size_t k = 0;
    for (const StateMap& map : sim.states[static_cast<std::size_t>(step)]) {
      for (double v : map.values()) buffer[k++] = static_cast<float>(v);
    }
    const fs::path file = dir / step_file_name(step);
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write " + file.string());
    out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  }
  write_text(dir / kManifestName, manifest.dump(2) + "\n");
}

Simulation read_simulation(const fs::path& dir) {
  const json manifest = parse_json(dir / kManifestName);
  Simulation sim;
  try {
    sim.id = manifest.at("id").get<std::string>();
    sim.dt_index = manifest.value("dt_index", 1);
    const int h = manifest.at("height").get<int>();
    const int w = manifest.at("width").get<int>();
    const int steps = manifest.at("steps").get<int>();
    const std::string dtype = manifest.value("dtype", std::string("float32"));
    sim.channels.clear();
    for (const auto& name : manifest.at("channels")) sim.channels.push_back(channel_from_name(name.get<std::string>()));
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    const std::size_t expected = sim.channels.size() * plane * dtype_size(dtype);
    for (int step = 0; step < steps; ++step) {
      const std::vector<double> values = decode(read_bytes(dir / step_file_name(step), expected), dtype);
      State state;
      for (std::size_t c = 0; c < sim.channels.size(); ++c) {
        state.emplace_back(sim.channels[c], h, w,
                           std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(c * plane),
                                               values.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane)));
      }
      sim.states.push_back(std::move(state));
    }
  } catch (const json::exception& e) {
    fail(ErrorCategory::data, (dir / kManifestName).string() + ": " + e.what());
  }
  return sim;
}

void write_ensemble(const fs::path& root, const Ensemble& ensemble, bool overwrite) {
  fs::create_directories(root);
  if (fs::exists(root / kEnsembleIndexName) && !overwrite) {
    fail(ErrorCategory::io, (root / kEnsembleIndexName).string() + " already exists");
  }
  json index;
  index["format"] = "rdstack-ensemble";
  index["version"] = 1;
  json sims = json::array();
  for (const Simulation& sim : ensemble.simulations) {
    write_simulation(root / sim.id, sim, overwrite);
    json entry;
    entry["id"] = sim.id;
    entry["path"] = sim.id;
    auto it = ensemble.split.find(sim.id);
    entry["split"] = it == ensemble.split.end() ? std::string("unassigned") : std::string(split_name(it->second));
    sims.push_back(entry);
  }
  index["simulations"] = sims;
  write_text(root / kEnsembleIndexName, index.dump(2) + "\n");
}

Ensemble read_ensemble(const fs::path& root) {
  const json index = parse_json(root / kEnsembleIndexName);
  Ensemble ensemble;
  try {
    for (const auto& entry : index.at("simulations")) {
      Simulation sim = read_simulation(root / entry.at("path").get<std::string>());
      const std::string split = entry.value("split", std::string("unassigned"));
      if (split != "unassigned") ensemble.split[sim.id] = split_from_name(split);
      ensemble.simulations.push_back(std::move(sim));
    }
  } catch (const json::exception& e) {
    fail(ErrorCategory::data, (root / kEnsembleIndexName).string() + ": " + e.what());
  }
  return ensemble;
}

Ensemble import_ensemble(const fs::path& source, const fs::path& destination, const ImportOptions& options) {
  const json manifest = parse_json(source / "import.json");
  Ensemble ensemble;
  try {
    const int h = manifest.at("height").get<int>();
    const int w = manifest.at("width").get<int>();
    const int steps = manifest.at("steps").get<int>();
    const std::string dtype = manifest.value("dtype", std::string("float32"));
    const std::string pattern = manifest.at("file_pattern").get<std::string>();
    const int digits = manifest.value("step_digits", 5);
    const auto placeholder = pattern.find("{step}");
    if (placeholder == std::string::npos) fail(ErrorCategory::data, "file_pattern must contain {step}");

    std::map<std::string, std::string> rename;
    if (manifest.contains("channel_map")) {
      for (const auto& [ext, native] : manifest["channel_map"].items()) rename[ext] = native.get<std::string>();
    }
    std::vector<Channel> external;
    for (const auto& name : manifest.at("channels")) {
      std::string n = name.get<std::string>();
      if (auto it = rename.find(n); it != rename.end()) n = it->second;
      external.push_back(channel_from_name(n));
    }
    // Native order is C, eps, Ux, Uy regardless of external order.
    std::vector<std::size_t> source_slot;
    for (Channel c : kPhysicalChannels) {
      auto it = std::find(external.begin(), external.end(), c);
      if (it == external.end()) fail(ErrorCategory::data, "import manifest lacks channel " + std::string(channel_name(c)));
      source_slot.push_back(static_cast<std::size_t>(it - external.begin()));
    }

    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    const std::size_t expected = external.size() * plane * dtype_size(dtype);
    for (const auto& entry : manifest.at("simulations")) {
      Simulation sim;
      sim.id = entry.at("id").get<std::string>();
      const fs::path dir = source / entry.value("path", sim.id);
      for (int step = 0; step < steps; ++step) {
        std::string step_text = std::to_string(step);
        if (static_cast<int>(step_text.size()) < digits) {
          step_text.insert(0, static_cast<std::size_t>(digits) - step_text.size(), '0');
        }
        std::string file = pattern;
        file.replace(placeholder, 6, step_text);
        const std::vector<double> values = decode(read_bytes(dir / file, expected), dtype);
        State state;
        for (std::size_t k = 0; k < kPhysicalChannels.size(); ++k) {
          const std::size_t c = source_slot[k];
          state.emplace_back(kPhysicalChannels[k], h, w,
                             std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(c * plane),
                                                 values.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane)));
        }
        sim.states.push_back(std::move(state));
      }
      if (options.crop_h || options.crop_w) {
        sim = crop_borders(sim, options.crop_h.value_or(h), options.crop_w.value_or(w));
      }
      if (entry.contains("split")) ensemble.split[sim.id] = split_from_name(entry["split"].get<std::string>());
      ensemble.simulations.push_back(std::move(sim));
    }
  } catch (const json::exception& e) {
    fail(ErrorCategory::data, (source / "import.json").string() + ": " + e.what());
  }
  write_ensemble(destination, ensemble, options.overwrite);
  return ensemble;
}

}  // namespace rdstack::storage
