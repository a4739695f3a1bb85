#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "rdstack/core_data.hpp"

namespace rdstack::storage {

namespace fs = std::filesystem;

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kEnsembleIndexName = "ensemble.json";

/// Name of the per-step array file: step_00000.bin, step_00001.bin, ...
std::string step_file_name(int step);

/// Writes one simulation directory: manifest.json plus one float32 array per
/// step, channel-major, little-endian. Refuses to replace an existing
/// directory unless `overwrite` is set.
void write_simulation(const fs::path& dir, const Simulation& sim, bool overwrite = false);
Simulation read_simulation(const fs::path& dir);

/// Writes every simulation under root/<id>/ and an index listing directory and split.
void write_ensemble(const fs::path& root, const Ensemble& ensemble, bool overwrite = false);
Ensemble read_ensemble(const fs::path& root);

struct ImportOptions {
  std::optional<int> crop_h;
  std::optional<int> crop_w;
  bool overwrite = false;
};

/// Converts an external ensemble described by `<source>/import.json` into the
/// native layout. The import manifest names the external channel order, an
/// optional rename map onto {C, eps, Ux, Uy}, dtype (float32|float64), the
/// grid size, the step count and a file pattern containing "{step}".
Ensemble import_ensemble(const fs::path& source, const fs::path& destination, const ImportOptions& options);

std::string read_text(const fs::path& path);
/// Writes through a temporary file and renames, so readers never see a partial file.
void write_text(const fs::path& path, const std::string& text);

}  // namespace rdstack::storage
