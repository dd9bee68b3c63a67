#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dabn/data.hpp"
#include "dabn/rng.hpp"

namespace dabn {

// Fixed per-user affine transform applied identically to every class, so the
// class-conditional shapes are shared across users while the marginals shift.
struct UserTransform {
  std::array<double, 3> offset{0.0, 0.0, 0.0};
  std::array<double, 3> scale{1.0, 1.0, 1.0};
};

// Switches one user's transform from a given window index onward.
struct DriftSpec {
  std::size_t user = 0;
  std::size_t at_window = 0;
  UserTransform after;
};

struct SynthSpec {
  std::size_t num_users = 6;
  std::size_t classes = 3;
  std::size_t windows_per_class = 60;
  std::size_t window_len = 40;
  double noise_sigma = 0.05;
  // ranges used to draw transforms for users without an explicit entry
  std::array<double, 2> offset_range{-0.5, 0.5};
  std::array<double, 2> scale_range{0.9, 1.15};
  std::vector<UserTransform> users;  // optional explicit per-user transforms
  std::optional<DriftSpec> drift;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_users < 2) throw std::invalid_argument("synth: need at least 2 users");
    if (classes < 2) throw std::invalid_argument("synth: need at least 2 classes");
    if (windows_per_class == 0 || window_len == 0)
      throw std::invalid_argument("synth: empty sizes");
    if (!(offset_range[0] <= offset_range[1]) || !(scale_range[0] <= scale_range[1]))
      throw std::invalid_argument("synth: bad ranges");
    if (scale_range[0] == 0.0 && scale_range[1] == 0.0)
      throw std::invalid_argument("synth: degenerate zero scale range");
    for (const auto& u : users)
      for (const double s : u.scale)
        if (s == 0.0) throw std::invalid_argument("synth: degenerate zero scale");
    if (drift && drift->user >= num_users)
      throw std::invalid_argument("synth: drift user out of range");
  }
};

namespace detail {

// Class-conditional base signal: per class a distinct oscillation frequency,
// amplitude and level, shared by all users.
inline double synth_base_value(std::size_t cls, std::size_t axis, std::size_t t,
                               std::size_t window_len, double phase) {
  const double freq = 1.0 + static_cast<double>(cls);
  const double level = 1.6 + 0.45 * static_cast<double>(cls) +
                       0.15 * static_cast<double>(axis);
  const double amp = 0.5 + 0.1 * static_cast<double>((cls + axis) % 3);
  const double arg = 2.0 * 3.141592653589793238462643383279502884 * freq *
                         static_cast<double>(t) / static_cast<double>(window_len) +
                     phase + 0.7 * static_cast<double>(axis);
  return level + amp * std::sin(arg);
}

}  // namespace detail

// Deterministic covariate-shifted multi-user dataset of prebuilt windows.
// Windows per user come in class blocks, mirroring activity-block recordings.
inline Dataset synth_generate(const SynthSpec& spec) {
  spec.validate();

  std::vector<UserTransform> transforms = spec.users;
  if (transforms.size() > spec.num_users) transforms.resize(spec.num_users);
  {
    Rng trng = substream(spec.seed, "synth:transforms");
    while (transforms.size() < spec.num_users) {
      UserTransform u;
      for (double& o : u.offset) o = trng.uniform(spec.offset_range[0], spec.offset_range[1]);
      for (double& s : u.scale) s = trng.uniform(spec.scale_range[0], spec.scale_range[1]);
      transforms.push_back(u);
    }
  }

  Dataset ds;
  ds.window_len = spec.window_len;
  ds.stride = spec.window_len;  // windows are generated directly, no overlap
  {
    std::ostringstream os;
    os << "synth:v1|users" << spec.num_users << "|classes" << spec.classes << "|wpc"
       << spec.windows_per_class << "|len" << spec.window_len << "|seed" << spec.seed;
    ds.pipeline = os.str();
  }
  for (std::size_t m = 0; m < spec.classes; ++m) ds.labels.push_back("c" + std::to_string(m));
  for (std::size_t k = 0; k < spec.num_users; ++k) {
    std::string name = "u";
    if (spec.num_users > 10 && k < 10) name += "0";
    ds.subjects.push_back(name + std::to_string(k));
  }

  ds.windows.resize(spec.num_users);
  for (std::size_t k = 0; k < spec.num_users; ++k) {
    std::size_t tau = 0;
    for (std::size_t m = 0; m < spec.classes; ++m) {
      Rng rng = substream(spec.seed, "synth:windows", k * 1000003ull + m);
      for (std::size_t j = 0; j < spec.windows_per_class; ++j) {
        const UserTransform& tf =
            (spec.drift && spec.drift->user == k && tau >= spec.drift->at_window)
                ? spec.drift->after
                : transforms[k];
        Window w;
        w.subject = ds.subjects[k];
        w.label = ds.labels[m];
        w.index = tau;
        w.data = Matrix(spec.window_len, 3);
        const double phase = rng.uniform(0.0, 2.0 * 3.141592653589793238462643383279502884);
        for (std::size_t t = 0; t < spec.window_len; ++t) {
          for (std::size_t ax = 0; ax < 3; ++ax) {
            const double base = detail::synth_base_value(m, ax, t, spec.window_len, phase) +
                                spec.noise_sigma * rng.normal();
            w.data(t, ax) = tf.offset[ax] + tf.scale[ax] * base;
          }
        }
        ds.windows[k].push_back(std::move(w));
        ++tau;
      }
      ds.series.push_back({ds.subjects[k], ds.labels[m], spec.windows_per_class * spec.window_len,
                           spec.windows_per_class});
    }
  }
  return ds;
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec spec;
  if (j.contains("num_users")) spec.num_users = j.at("num_users").get<std::size_t>();
  if (j.contains("classes")) spec.classes = j.at("classes").get<std::size_t>();
  if (j.contains("windows_per_class"))
    spec.windows_per_class = j.at("windows_per_class").get<std::size_t>();
  if (j.contains("window_len")) spec.window_len = j.at("window_len").get<std::size_t>();
  if (j.contains("noise_sigma")) spec.noise_sigma = j.at("noise_sigma").get<double>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("offset_range"))
    spec.offset_range = j.at("offset_range").get<std::array<double, 2>>();
  if (j.contains("scale_range"))
    spec.scale_range = j.at("scale_range").get<std::array<double, 2>>();
  if (j.contains("users")) {
    for (const auto& u : j.at("users")) {
      UserTransform tf;
      if (u.contains("offset")) tf.offset = u.at("offset").get<std::array<double, 3>>();
      if (u.contains("scale")) tf.scale = u.at("scale").get<std::array<double, 3>>();
      spec.users.push_back(tf);
    }
  }
  if (j.contains("drift")) {
    DriftSpec d;
    const auto& jd = j.at("drift");
    d.user = jd.at("user").get<std::size_t>();
    d.at_window = jd.at("at_window").get<std::size_t>();
    if (jd.contains("offset")) d.after.offset = jd.at("offset").get<std::array<double, 3>>();
    if (jd.contains("scale")) d.after.scale = jd.at("scale").get<std::array<double, 3>>();
    spec.drift = d;
  }
  return spec;
}

inline SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open synth spec: " + path);
  nlohmann::json j;
  in >> j;
  return synth_spec_from_json(j);
}

}  // namespace dabn
