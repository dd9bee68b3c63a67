#pragma once

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dabn/model.hpp"

namespace dabn {

// Checkpoint container: "DABN1" magic, a JSON manifest (architecture, label
// map, hyper parameters, momenta), then named little-endian tensor blobs.
// Weights are stored as 32-bit floats, running statistics as 64-bit floats.

namespace detail {

inline void put_tensor_f32(std::string& buf, const std::string& name,
                           const std::vector<double>& v, std::vector<std::uint64_t> dims) {
  put_raw<std::uint16_t>(buf, static_cast<std::uint16_t>(name.size()));
  buf += name;
  put_raw<std::uint8_t>(buf, 0);  // f32
  put_raw<std::uint8_t>(buf, static_cast<std::uint8_t>(dims.size()));
  for (const std::uint64_t d : dims) put_raw<std::uint64_t>(buf, d);
  for (const double x : v) put_raw<float>(buf, static_cast<float>(x));
}

inline void put_tensor_f64(std::string& buf, const std::string& name,
                           const std::vector<double>& v, std::vector<std::uint64_t> dims) {
  put_raw<std::uint16_t>(buf, static_cast<std::uint16_t>(name.size()));
  buf += name;
  put_raw<std::uint8_t>(buf, 1);  // f64
  put_raw<std::uint8_t>(buf, static_cast<std::uint8_t>(dims.size()));
  for (const std::uint64_t d : dims) put_raw<std::uint64_t>(buf, d);
  for (const double x : v) put_raw<double>(buf, x);
}

struct TensorBlob {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

inline TensorBlob get_tensor(const std::string& buf, std::size_t& pos) {
  TensorBlob t;
  const auto nlen = get_raw<std::uint16_t>(buf, pos);
  if (pos + nlen > buf.size()) throw std::runtime_error("checkpoint: truncated tensor name");
  t.name = buf.substr(pos, nlen);
  pos += nlen;
  const auto dtype = get_raw<std::uint8_t>(buf, pos);
  const auto ndim = get_raw<std::uint8_t>(buf, pos);
  std::uint64_t count = 1;
  for (std::uint8_t i = 0; i < ndim; ++i) {
    t.dims.push_back(get_raw<std::uint64_t>(buf, pos));
    count *= t.dims.back();
  }
  t.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i)
    t.values[i] = dtype == 0 ? static_cast<double>(get_raw<float>(buf, pos))
                             : get_raw<double>(buf, pos);
  return t;
}

}  // namespace detail

inline std::string serialize_model(const TrainedModel& m) {
  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["arch"] = {{"conv_layers", m.arch.conv_layers},
                      {"feature_maps", m.arch.feature_maps},
                      {"kernel", m.arch.kernel},
                      {"stride", m.arch.stride},
                      {"pool", m.arch.pool},
                      {"dense_width", m.arch.dense_width},
                      {"dropout_rate", m.arch.dropout_rate},
                      {"classes", m.arch.classes},
                      {"window_len", m.arch.window_len},
                      {"in_channels", m.arch.in_channels}};
  manifest["hyper"] = {{"learning_rate", m.hyper.learning_rate},
                       {"decay", m.hyper.decay},
                       {"epochs", m.hyper.epochs},
                       {"batch_size", m.hyper.batch_size},
                       {"train_momentum", m.hyper.train_momentum},
                       {"beta1", m.hyper.beta1},
                       {"beta2", m.hyper.beta2},
                       {"eps_opt", m.hyper.eps_opt},
                       {"seed", m.hyper.seed}};
  manifest["label_map"] = m.label_map;
  manifest["bn"] = {{"train_momentum", m.bn.train_momentum},
                    {"online_momentum", m.bn.online_momentum},
                    {"epsilon", m.bn.channels.empty() ? 1e-5 : m.bn.channels[0].epsilon}};

  std::string buf = "DABN1";
  const std::string mjson = manifest.dump();
  detail::put_raw<std::uint32_t>(buf, static_cast<std::uint32_t>(mjson.size()));
  buf += mjson;

  std::uint32_t tensor_count = static_cast<std::uint32_t>(2 * m.conv.size() + 4 + 4);
  detail::put_raw<std::uint32_t>(buf, tensor_count);
  for (std::size_t l = 0; l < m.conv.size(); ++l) {
    const ConvLayer& c = m.conv[l];
    detail::put_tensor_f32(buf, "conv" + std::to_string(l) + ".w", c.w,
                           {c.out_ch, c.in_ch, c.kernel});
    detail::put_tensor_f32(buf, "conv" + std::to_string(l) + ".b", c.b, {c.out_ch});
  }
  detail::put_tensor_f32(buf, "dense.w", m.dense.w, {m.dense.out, m.dense.in});
  detail::put_tensor_f32(buf, "dense.b", m.dense.b, {m.dense.out});
  detail::put_tensor_f32(buf, "classifier.w", m.classifier.w,
                         {m.classifier.out, m.classifier.in});
  detail::put_tensor_f32(buf, "classifier.b", m.classifier.b, {m.classifier.out});

  std::vector<double> gamma, beta, rmean, rvar;
  for (const auto& ch : m.bn.channels) {
    gamma.push_back(ch.gamma);
    beta.push_back(ch.beta);
    rmean.push_back(ch.running_mean);
    rvar.push_back(ch.running_var);
  }
  detail::put_tensor_f32(buf, "bn.gamma", gamma, {gamma.size()});
  detail::put_tensor_f32(buf, "bn.beta", beta, {beta.size()});
  detail::put_tensor_f64(buf, "bn.running_mean", rmean, {rmean.size()});
  detail::put_tensor_f64(buf, "bn.running_var", rvar, {rvar.size()});
  return buf;
}

inline TrainedModel deserialize_model(const std::string& buf) {
  if (buf.size() < 9 || buf.compare(0, 5, "DABN1") != 0)
    throw std::runtime_error("checkpoint: bad magic");
  std::size_t pos = 5;
  const auto mlen = detail::get_raw<std::uint32_t>(buf, pos);
  if (pos + mlen > buf.size()) throw std::runtime_error("checkpoint: truncated manifest");
  const nlohmann::json manifest = nlohmann::json::parse(buf.substr(pos, mlen));
  pos += mlen;

  TrainedModel m;
  const auto& ja = manifest.at("arch");
  m.arch.conv_layers = ja.at("conv_layers").get<std::size_t>();
  m.arch.feature_maps = ja.at("feature_maps").get<std::size_t>();
  m.arch.kernel = ja.at("kernel").get<std::size_t>();
  m.arch.stride = ja.at("stride").get<std::size_t>();
  m.arch.pool = ja.at("pool").get<std::size_t>();
  m.arch.dense_width = ja.at("dense_width").get<std::size_t>();
  m.arch.dropout_rate = ja.at("dropout_rate").get<double>();
  m.arch.classes = ja.at("classes").get<std::size_t>();
  m.arch.window_len = ja.at("window_len").get<std::size_t>();
  m.arch.in_channels = ja.at("in_channels").get<std::size_t>();
  const auto& jh = manifest.at("hyper");
  m.hyper.learning_rate = jh.at("learning_rate").get<double>();
  m.hyper.decay = jh.at("decay").get<double>();
  m.hyper.epochs = jh.at("epochs").get<std::size_t>();
  m.hyper.batch_size = jh.at("batch_size").get<std::size_t>();
  m.hyper.train_momentum = jh.at("train_momentum").get<double>();
  m.hyper.beta1 = jh.at("beta1").get<double>();
  m.hyper.beta2 = jh.at("beta2").get<double>();
  m.hyper.eps_opt = jh.at("eps_opt").get<double>();
  m.hyper.seed = jh.at("seed").get<std::uint64_t>();
  m.label_map = manifest.at("label_map").get<std::vector<std::string>>();
  const auto& jb = manifest.at("bn");
  m.bn = BnLayerState(m.arch.dense_width, jb.at("train_momentum").get<double>(),
                      jb.at("online_momentum").get<double>(), jb.at("epsilon").get<double>());

  const auto tensor_count = detail::get_raw<std::uint32_t>(buf, pos);
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    detail::TensorBlob t = detail::get_tensor(buf, pos);
    if (t.name.rfind("conv", 0) == 0) {
      const std::size_t dot = t.name.find('.');
      const std::size_t layer = std::stoul(t.name.substr(4, dot - 4));
      if (layer >= m.arch.conv_layers) throw std::runtime_error("checkpoint: bad conv index");
      if (m.conv.size() <= layer) m.conv.resize(layer + 1);
      ConvLayer& c = m.conv[layer];
      if (t.name.ends_with(".w")) {
        if (t.dims.size() != 3) throw std::runtime_error("checkpoint: conv w dims");
        c.out_ch = t.dims[0];
        c.in_ch = t.dims[1];
        c.kernel = t.dims[2];
        c.w = std::move(t.values);
      } else {
        c.b = std::move(t.values);
      }
    } else if (t.name == "dense.w") {
      m.dense.out = t.dims[0];
      m.dense.in = t.dims[1];
      m.dense.w = std::move(t.values);
    } else if (t.name == "dense.b") {
      m.dense.b = std::move(t.values);
    } else if (t.name == "classifier.w") {
      m.classifier.out = t.dims[0];
      m.classifier.in = t.dims[1];
      m.classifier.w = std::move(t.values);
    } else if (t.name == "classifier.b") {
      m.classifier.b = std::move(t.values);
    } else if (t.name == "bn.gamma") {
      for (std::size_t l = 0; l < t.values.size(); ++l) m.bn.channels[l].gamma = t.values[l];
    } else if (t.name == "bn.beta") {
      for (std::size_t l = 0; l < t.values.size(); ++l) m.bn.channels[l].beta = t.values[l];
    } else if (t.name == "bn.running_mean") {
      for (std::size_t l = 0; l < t.values.size(); ++l)
        m.bn.channels[l].running_mean = t.values[l];
    } else if (t.name == "bn.running_var") {
      for (std::size_t l = 0; l < t.values.size(); ++l) m.bn.channels[l].running_var = t.values[l];
    } else {
      throw std::runtime_error("checkpoint: unknown tensor " + t.name);
    }
  }
  if (m.conv.size() != m.arch.conv_layers || m.dense.w.empty() || m.classifier.w.empty())
    throw std::runtime_error("checkpoint: missing tensors");
  return m;
}

inline void save_model(const TrainedModel& m, const std::string& path) {
  const std::string buf = serialize_model(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return deserialize_model(os.str());
}

}  // namespace dabn
