// SPDX-License-Identifier: Apache-2.0
#include "kvl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "kvl/error.hpp"

namespace kvl {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr const char* kFormatName = "kvl-checkpoint";
constexpr int kFormatVersion = 1;

json config_to_json(const ModelConfig& c) {
  return json{{"d", c.d},         {"heads", c.heads},   {"layers", c.layers},
              {"d_ff", c.d_ff},   {"d_app", c.d_app},   {"max_seq", c.max_seq}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d = j.at("d").get<int>();
  c.heads = j.at("heads").get<int>();
  c.layers = j.at("layers").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.d_app = j.at("d_app").get<int>();
  c.max_seq = j.at("max_seq").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const Vocab& vocab,
                     std::ostream& out) {
  // tensor_views does not mutate; it only hands out storage pointers.
  auto views = tensor_views(const_cast<ModelParams&>(params));
  json tensors = json::array();
  for (const TensorView& view : views) {
    tensors.push_back(
        json{{"name", view.name}, {"rows", view.rows}, {"cols", view.cols}});
  }
  const json header{{"format", kFormatName},
                    {"version", kFormatVersion},
                    {"dtype", "float32le"},
                    {"config", config_to_json(params.config)},
                    {"vocab", vocab.surfaces()},
                    {"tensors", std::move(tensors)}};
  out << header.dump() << '\n';

  std::vector<float> buffer;
  for (const TensorView& view : views) {
    buffer.resize(static_cast<std::size_t>(view.size()));
    for (Eigen::Index i = 0; i < view.size(); ++i) {
      buffer[static_cast<std::size_t>(i)] = static_cast<float>(view.data[i]);
    }
    out.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  }
  if (!out) throw DataError("checkpoint write failed");
}

void save_checkpoint_file(const ModelParams& params, const Vocab& vocab,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint file: " + path);
  save_checkpoint(params, vocab, out);
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw DataError("checkpoint is empty");
  }
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header is not valid JSON: ") +
                    e.what());
  }
  if (header.value("format", "") != kFormatName) {
    throw DataError("not a kvl checkpoint");
  }
  if (header.value("version", -1) != kFormatVersion) {
    throw DataError("unsupported checkpoint version");
  }
  if (header.value("dtype", "") != "float32le") {
    throw DataError("unsupported checkpoint dtype");
  }

  Checkpoint ckpt;
  const ModelConfig config = config_from_json(header.at("config"));
  ckpt.vocab = Vocab(header.at("vocab").get<std::vector<std::string>>());
  ckpt.params = init_params(config, ckpt.vocab.rows(), 0);

  auto views = tensor_views(ckpt.params);
  const auto& tensor_list = header.at("tensors");
  if (tensor_list.size() != views.size()) {
    throw DataError("checkpoint lists " + std::to_string(tensor_list.size()) +
                    " tensors, model has " + std::to_string(views.size()));
  }
  std::vector<float> buffer;
  for (std::size_t t = 0; t < views.size(); ++t) {
    const auto& entry = tensor_list[t];
    if (entry.at("name").get<std::string>() != views[t].name ||
        entry.at("rows").get<Eigen::Index>() != views[t].rows ||
        entry.at("cols").get<Eigen::Index>() != views[t].cols) {
      throw DataError("checkpoint tensor '" +
                      entry.at("name").get<std::string>() +
                      "' does not match the model layout");
    }
    buffer.resize(static_cast<std::size_t>(views[t].size()));
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (!in) throw DataError("checkpoint payload truncated");
    for (Eigen::Index i = 0; i < views[t].size(); ++i) {
      views[t].data[i] = static_cast<double>(buffer[static_cast<std::size_t>(i)]);
    }
  }
  return ckpt;
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint file: " + path);
  return load_checkpoint(in);
}

}  // namespace kvl
