#include "rdstack/models/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <json.hpp>

#include "rdstack/error.hpp"
#include "rdstack/hash.hpp"
#include "rdstack/storage.hpp"

namespace rdstack::models {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "RDSTACK-CHECKPOINT 1\n";

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

}  // namespace

Checkpoint Checkpoint::capture(const SequenceModel& model, int level, std::string stats_hash,
                               std::vector<EpochRecord> log, int best_epoch) {
  Checkpoint c;
  c.spec = model.spec();
  c.level = level;
  c.stats_hash = std::move(stats_hash);
  c.log = std::move(log);
  c.best_epoch = best_epoch;
  c.input_scale = model.input_scale();
  c.input_offset = model.input_offset();
  for (const auto& e : model.parameters().entries()) {
    c.parameters.push_back({e.name, e.tensor.shape(), {e.tensor.data().begin(), e.tensor.data().end()}});
  }
  return c;
}

void load_parameters(SequenceModel& model, const std::vector<ParameterBlob>& parameters) {
  const auto& entries = model.parameters().entries();
  if (entries.size() != parameters.size()) {
    fail(ErrorCategory::shape_mismatch, "checkpoint has " + std::to_string(parameters.size()) +
                                            " parameters, model has " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ParameterBlob& p = parameters[i];
    nn::Tensor t = entries[i].tensor;
    if (p.name != entries[i].name || !(p.shape == t.shape()) || p.values.size() != t.numel()) {
      fail(ErrorCategory::shape_mismatch, "checkpoint parameter " + p.name + " " + p.shape.str() +
                                              " does not match model parameter " + entries[i].name + " " +
                                              t.shape().str());
    }
    std::ranges::copy(p.values, t.mutable_data().begin());
  }
}

std::unique_ptr<SequenceModel> Checkpoint::instantiate() const {
  auto model = make_model(spec, 0);
  load_parameters(*model, parameters);
  model->set_input_affine(input_scale, input_offset);
  return model;
}

std::string Checkpoint::serialize() const {
  json header;
  header["spec"] = json::parse(spec.to_json());
  header["level"] = level;
  header["stats_hash"] = stats_hash;
  header["best_epoch"] = best_epoch;
  header["input_scale"] = input_scale;
  header["input_offset"] = input_offset;
  header["log"] = json::array();
  for (const EpochRecord& r : log) {
    header["log"].push_back(
        {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"validation_loss", r.validation_loss}, {"seconds", r.seconds}});
  }
  header["parameters"] = json::array();
  for (const ParameterBlob& p : parameters) {
    header["parameters"].push_back({{"name", p.name}, {"shape", {p.shape.n, p.shape.c, p.shape.h, p.shape.w}}});
  }
  const std::string text = header.dump();
  std::string out(kMagic);
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += text;
  for (const ParameterBlob& p : parameters) {
    out.append(reinterpret_cast<const char*>(p.values.data()), p.values.size() * sizeof(double));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  if (bytes.compare(0, kMagic.size(), kMagic) != 0) fail(ErrorCategory::data, "not a checkpoint file");
  std::size_t pos = kMagic.size();
  std::uint64_t len = 0;
  if (bytes.size() < pos + sizeof len) fail(ErrorCategory::data, "truncated checkpoint header");
  std::memcpy(&len, bytes.data() + pos, sizeof len);
  pos += sizeof len;
  if (bytes.size() < pos + len) fail(ErrorCategory::data, "truncated checkpoint header");
  json header;
  try {
    header = json::parse(bytes.substr(pos, len));
  } catch (const json::exception& e) {
    fail(ErrorCategory::data, std::string("checkpoint header: ") + e.what());
  }
  pos += len;

  Checkpoint c;
  c.spec = ModelSpec::from_json(header.at("spec").dump());
  c.level = header.at("level").get<int>();
  c.stats_hash = header.at("stats_hash").get<std::string>();
  c.best_epoch = header.value("best_epoch", -1);
  c.input_scale = header.at("input_scale").get<std::vector<double>>();
  c.input_offset = header.at("input_offset").get<std::vector<double>>();
  for (const json& r : header.at("log")) {
    c.log.push_back({r.at("epoch").get<int>(), r.at("train_loss").get<double>(), r.at("validation_loss").get<double>(),
                     r.at("seconds").get<double>()});
  }
  for (const json& p : header.at("parameters")) {
    const auto dims = p.at("shape").get<std::vector<int>>();
    if (dims.size() != 4) fail(ErrorCategory::data, "checkpoint parameter shape must have 4 dims");
    ParameterBlob blob{p.at("name").get<std::string>(), nn::Shape{dims[0], dims[1], dims[2], dims[3]}, {}};
    const std::size_t count = blob.shape.numel();
    if (bytes.size() < pos + count * sizeof(double)) fail(ErrorCategory::data, "truncated checkpoint parameters");
    blob.values.resize(count);
    std::memcpy(blob.values.data(), bytes.data() + pos, count * sizeof(double));
    pos += count * sizeof(double);
    c.parameters.push_back(std::move(blob));
  }
  if (pos != bytes.size()) fail(ErrorCategory::data, "trailing bytes in checkpoint");
  return c;
}

std::string Checkpoint::hash() const { return fnv1a_hex(serialize()); }

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  storage::write_text(path, checkpoint.serialize());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return Checkpoint::deserialize(storage::read_text(path)); }

}  // namespace rdstack::models
