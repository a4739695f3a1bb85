#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rdstack/models/model.hpp"

namespace rdstack::models {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double seconds = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct ParameterBlob {
  std::string name;
  nn::Shape shape;
  std::vector<double> values;

  friend bool operator==(const ParameterBlob&, const ParameterBlob&) = default;
};

/// Trained network of one stacking level with the provenance needed to use it.
struct Checkpoint {
  ModelSpec spec;
  int level = 0;
  std::string stats_hash;
  std::vector<EpochRecord> log;
  int best_epoch = -1;
  std::vector<ParameterBlob> parameters;
  std::vector<double> input_scale;
  std::vector<double> input_offset;

  static Checkpoint capture(const SequenceModel& model, int level, std::string stats_hash,
                            std::vector<EpochRecord> log = {}, int best_epoch = -1);

  /// Builds a model with these parameter values.
  std::unique_ptr<SequenceModel> instantiate() const;

  /// Binary container: magic line, header length, JSON header, raw
  /// little-endian doubles in parameter order.
  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);
  /// Hash of serialize().
  std::string hash() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Copies parameter values into a model of matching spec.
void load_parameters(SequenceModel& model, const std::vector<ParameterBlob>& parameters);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rdstack::models
