#include "cxr/nn/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "cxr/error.hpp"

namespace cxr::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::uint32_t crc_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

Tensor round_to_float32(const Tensor& t) {
  return t.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

void write_checkpoint(const std::filesystem::path& path, const std::string& region_vocab_hash,
                      const nlohmann::json& metadata, const std::vector<TensorEntry>& tensors) {
  std::string payload;
  nlohmann::json layers = nlohmann::json::array();
  std::set<std::string> seen;
  for (const auto& e : tensors) {
    if (!seen.insert(e.name).second) throw CheckpointError("duplicate tensor name '" + e.name + "'");
    require_finite(*e.value, "checkpoint tensor " + e.name);
    layers.push_back({{"name", e.name},
                      {"shape", {e.value->rows(), e.value->cols()}},
                      {"activation", e.activation.empty() ? "none" : e.activation}});
    const std::size_t offset = payload.size();
    payload.resize(offset + static_cast<std::size_t>(e.value->size()) * sizeof(float));
    for (Eigen::Index i = 0; i < e.value->size(); ++i) {
      const float f = static_cast<float>(e.value->data()[i]);
      std::memcpy(payload.data() + offset + static_cast<std::size_t>(i) * sizeof(float), &f, sizeof(float));
    }
  }
  nlohmann::json header = {{"schema_version", kCheckpointSchemaVersion},
                           {"layers", layers},
                           {"region_vocab_hash", region_vocab_hash},
                           {"payload_bytes", payload.size()},
                           {"payload_crc32", crc_of(payload)},
                           {"metadata", metadata}};

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out << header.dump() << '\n';
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw CheckpointError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line)) throw CheckpointError("checkpoint " + path.string() + " is empty");
  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  CheckpointData data;
  try {
    const auto header = nlohmann::json::parse(header_line);
    data.header.schema_version = header.at("schema_version").get<int>();
    if (data.header.schema_version != kCheckpointSchemaVersion) {
      throw CheckpointError("unsupported checkpoint schema version " +
                            std::to_string(data.header.schema_version));
    }
    data.header.region_vocab_hash = header.at("region_vocab_hash").get<std::string>();
    data.header.metadata = header.value("metadata", nlohmann::json::object());
    const auto expected_bytes = header.at("payload_bytes").get<std::size_t>();
    if (payload.size() != expected_bytes) {
      throw CheckpointError("checkpoint payload is " + std::to_string(payload.size()) + " bytes, header declares " +
                            std::to_string(expected_bytes) + " (truncated or padded file)");
    }
    if (crc_of(payload) != header.at("payload_crc32").get<std::uint32_t>()) {
      throw CheckpointError("checkpoint payload checksum mismatch");
    }
    std::size_t offset = 0;
    for (const auto& layer : header.at("layers")) {
      TensorRecord rec{layer.at("name").get<std::string>(), layer.at("shape").at(0).get<Eigen::Index>(),
                       layer.at("shape").at(1).get<Eigen::Index>(), layer.at("activation").get<std::string>()};
      if (rec.rows < 0 || rec.cols < 0) throw CheckpointError("negative shape for " + rec.name);
      const std::size_t bytes = static_cast<std::size_t>(rec.rows * rec.cols) * sizeof(float);
      if (offset + bytes > payload.size()) throw CheckpointError("layer " + rec.name + " runs past payload end");
      Tensor t(rec.rows, rec.cols);
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        float f;
        std::memcpy(&f, payload.data() + offset + static_cast<std::size_t>(i) * sizeof(float), sizeof(float));
        t.data()[i] = f;
      }
      offset += bytes;
      if (!data.tensors.emplace(rec.name, std::move(t)).second) {
        throw CheckpointError("duplicate tensor name '" + rec.name + "'");
      }
      data.header.layers.push_back(std::move(rec));
    }
    if (offset != payload.size()) throw CheckpointError("checkpoint payload has trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
  return data;
}

void restore_parameters(const CheckpointData& data, const std::vector<TensorEntry>& layout,
                        const ParameterList& params) {
  std::map<std::string, const TensorRecord*> records;
  for (const auto& r : data.header.layers) records[r.name] = &r;
  for (const auto& e : layout) {
    auto it = records.find(e.name);
    if (it == records.end()) throw CheckpointError("checkpoint lacks tensor " + e.name);
    const TensorRecord& r = *it->second;
    if (r.rows != e.value->rows() || r.cols != e.value->cols()) {
      throw CheckpointError("tensor " + e.name + ": checkpoint shape [" + std::to_string(r.rows) + "x" +
                            std::to_string(r.cols) + "] but model expects " + shape_string(*e.value));
    }
    if (r.activation != e.activation) {
      throw CheckpointError("tensor " + e.name + ": activation " + r.activation + " but model expects " +
                            e.activation);
    }
  }
  std::vector<std::pair<Parameter*, const Tensor*>> plan;
  for (Parameter* p : params) {
    auto it = data.tensors.find(p->name);
    if (it == data.tensors.end()) throw CheckpointError("checkpoint lacks parameter " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw CheckpointError("parameter " + p->name + " shape mismatch");
    }
    plan.emplace_back(p, &it->second);
  }
  for (auto& [p, t] : plan) {
    p->value = *t;
    p->zero_grad();
  }
}

}  // namespace cxr::nn
