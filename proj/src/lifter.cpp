// Copyright 2026 The occlift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "occlift/lifter.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "occlift/error.hpp"
#include "occlift/rng.hpp"

namespace occlift {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

nlohmann::ordered_json config_to_json(const LifterConfig& c) {
  nlohmann::ordered_json j;
  j["topology"] = c.topology;
  j["in_dims_per_joint"] = c.in_dims_per_joint;
  j["channels"] = c.channels;
  j["blocks"] = c.blocks;
  j["kernel"] = c.kernel;
  j["dilation_base"] = c.dilation_base;
  j["dropout_rate"] = c.dropout_rate;
  j["pixel_center_x"] = c.pixel_center_x;
  j["pixel_center_y"] = c.pixel_center_y;
  j["pixel_scale"] = c.pixel_scale;
  j["output_scale_mm"] = c.output_scale_mm;
  return j;
}

LifterConfig config_from_json(const nlohmann::json& j) {
  LifterConfig c;
  c.topology = j.at("topology").get<std::string>();
  c.in_dims_per_joint = j.at("in_dims_per_joint").get<int>();
  c.channels = j.at("channels").get<int>();
  c.blocks = j.at("blocks").get<int>();
  c.kernel = j.at("kernel").get<int>();
  c.dilation_base = j.at("dilation_base").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.pixel_center_x = j.at("pixel_center_x").get<double>();
  c.pixel_center_y = j.at("pixel_center_y").get<double>();
  c.pixel_scale = j.at("pixel_scale").get<double>();
  c.output_scale_mm = j.at("output_scale_mm").get<double>();
  return c;
}

std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

template <typename T>
void init_uniform(nn::Tensor<T>& t, double bound, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace

void LifterConfig::validate() const {
  get_topology(topology);
  auto fail = [](const std::string& msg) {
    throw Error(ErrorKind::kInvalidArgument, "lifter config: " + msg);
  };
  if (in_dims_per_joint != 2 && in_dims_per_joint != 4)
    fail("in_dims_per_joint must be 2 or 4");
  if (channels < 1) fail("channels must be >= 1");
  if (blocks < 0) fail("blocks must be >= 0");
  if (kernel < 1 || kernel % 2 == 0) fail("kernel must be a positive odd number");
  if (dilation_base < 1) fail("dilation_base must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    fail("dropout_rate must be in [0, 1)");
  if (!(pixel_scale > 0.0)) fail("pixel_scale must be positive");
  if (!(output_scale_mm > 0.0)) fail("output_scale_mm must be positive");
  if (receptive_field(*this) > (1 << 20)) fail("receptive field too large");
}

int receptive_field(const LifterConfig& c) {
  std::int64_t rf = c.kernel;
  for (int b = 1; b <= c.blocks; ++b)
    rf += static_cast<std::int64_t>(c.kernel - 1) * ipow(c.dilation_base, b);
  return static_cast<int>(rf);
}

std::int64_t block_parameter_count(const LifterConfig& c) {
  const std::int64_t ch = c.channels;
  const std::int64_t dilated = ch * ch * c.kernel + ch + 2 * ch;
  const std::int64_t pointwise = ch * ch + ch + 2 * ch;
  return dilated + pointwise;
}

std::int64_t parameter_count(const LifterConfig& c) {
  const std::int64_t ch = c.channels;
  const std::int64_t n_in =
      static_cast<std::int64_t>(get_topology(c.topology).n_joints()) *
      c.in_dims_per_joint;
  const std::int64_t n_out = get_topology(c.topology).n_joints() * 3;
  const std::int64_t input = n_in * ch * c.kernel + ch + 2 * ch;
  const std::int64_t output = ch * n_out + n_out;
  return input + c.blocks * block_parameter_count(c) + output;
}

template <typename T>
LifterModel<T> LifterModel<T>::build(const LifterConfig& config,
                                     std::uint64_t seed) {
  config.validate();
  LifterModel m;
  m.config_ = config;
  const auto ch = static_cast<std::size_t>(config.channels);
  const auto k = static_cast<std::size_t>(config.kernel);
  const auto n = static_cast<std::size_t>(get_topology(config.topology).n_joints());
  const std::size_t in_ch = n * config.in_dims_per_joint;

  auto make_conv = [](const std::string& name, std::size_t out, std::size_t in,
                      std::size_t kk, int dilation) {
    Conv c;
    c.weight = nn::Parameter<T>(name + ".weight", nn::Tensor<T>({out, in, kk}));
    c.bias = nn::Parameter<T>(name + ".bias", nn::Tensor<T>({out}));
    c.dilation = dilation;
    return c;
  };

  m.input_.conv = make_conv("input.conv", ch, in_ch, k, 1);
  m.input_.bn = nn::BatchNorm1d<T>("input.bn", ch);
  for (int b = 1; b <= config.blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    Block blk;
    blk.dilated.conv = make_conv(p + ".conv1", ch, ch, k,
                                 static_cast<int>(ipow(config.dilation_base, b)));
    blk.dilated.bn = nn::BatchNorm1d<T>(p + ".bn1", ch);
    blk.pointwise.conv = make_conv(p + ".conv2", ch, ch, 1, 1);
    blk.pointwise.bn = nn::BatchNorm1d<T>(p + ".bn2", ch);
    m.blocks_.push_back(std::move(blk));
  }
  m.output_ = make_conv("output", n * 3, ch, 1, 1);

  const auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    if (p->value.rank() != 3) continue;  // biases and BN stay at defaults
    const double fan_in = static_cast<double>(p->value.dim(1) * p->value.dim(2));
    const double bound = p == &m.output_.weight ? 1.0 / std::sqrt(fan_in)
                                                : std::sqrt(6.0 / fan_in);
    init_uniform(p->value, bound, derive_seed(seed, i));
  }
  return m;
}

template <typename T>
std::vector<nn::Parameter<T>*> LifterModel<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  auto unit = [&](Unit& u) {
    out.push_back(&u.conv.weight);
    out.push_back(&u.conv.bias);
    out.push_back(&u.bn.gamma);
    out.push_back(&u.bn.beta);
  };
  unit(input_);
  for (auto& b : blocks_) {
    unit(b.dilated);
    unit(b.pointwise);
  }
  out.push_back(&output_.weight);
  out.push_back(&output_.bias);
  return out;
}

template <typename T>
std::vector<const nn::Parameter<T>*> LifterModel<T>::parameters() const {
  auto mut = const_cast<LifterModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <typename T>
std::vector<nn::BatchNorm1d<T>*> LifterModel<T>::batchnorms() {
  std::vector<nn::BatchNorm1d<T>*> out{&input_.bn};
  for (auto& b : blocks_) {
    out.push_back(&b.dilated.bn);
    out.push_back(&b.pointwise.bn);
  }
  return out;
}

template <typename T>
std::vector<const nn::BatchNorm1d<T>*> LifterModel<T>::batchnorms() const {
  auto mut = const_cast<LifterModel*>(this)->batchnorms();
  return {mut.begin(), mut.end()};
}

template <typename T>
std::int64_t LifterModel<T>::enumerated_parameter_count() const {
  std::int64_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::int64_t>(p->value.size());
  return n;
}

template <typename T>
nn::Var<T> LifterModel<T>::forward(nn::Tape<T>& tape, nn::Var<T> x,
                                   std::uint64_t dropout_seed) {
  const std::size_t want = static_cast<std::size_t>(topology().n_joints()) *
                           config_.in_dims_per_joint;
  if (x.value().rank() != 3 || x.value().dim(1) != want)
    throw Error(ErrorKind::kShapeMismatch,
                "lifter input must be [N," + std::to_string(want) + ",L], got " +
                    nn::shape_string(x.value().shape()));
  const auto rf = static_cast<std::size_t>(receptive_field());
  if (x.value().dim(2) < rf)
    throw Error(ErrorKind::kShapeMismatch,
                "window of " + std::to_string(x.value().dim(2)) +
                    " frames is shorter than the receptive field (f >= " +
                    std::to_string(rf) + " required)");
  std::uint64_t layer = 0;
  auto run = [&](Unit& u, nn::Var<T> in) {
    auto y = nn::conv1d(in, tape.param(u.conv.weight), tape.param(u.conv.bias),
                        u.conv.dilation);
    y = nn::batchnorm1d(y, u.bn, mode_);
    y = nn::mish(y);
    return nn::dropout(y, config_.dropout_rate, mode_,
                       derive_seed(dropout_seed, layer++));
  };
  auto h = run(input_, x);
  for (auto& b : blocks_) {
    auto y = run(b.dilated, h);
    y = run(b.pointwise, y);
    h = nn::residual_add(y, h);
  }
  auto out = nn::conv1d(h, tape.param(output_.weight), tape.param(output_.bias), 1);
  return nn::scale(out, config_.output_scale_mm);
}

template <typename T>
nn::Tensor<T> network_input(const LifterConfig& config,
                            const GuidedWindow& window, int first, int length) {
  if (first < 0 || length < 0 || first + length > window.frames)
    throw Error(ErrorKind::kShapeMismatch, "network_input: frame range outside window");
  const int n = window.n_joints;
  const int dims = config.in_dims_per_joint;
  nn::Tensor<T> out({static_cast<std::size_t>(n * dims),
                     static_cast<std::size_t>(length)});
  const double inv = 1.0 / config.pixel_scale;
  for (int f = 0; f < length; ++f) {
    for (int j = 0; j < n; ++j) {
      const double x = window.at(first + f, j * 4 + 0);
      const double y = window.at(first + f, j * 4 + 1);
      const double mx = window.at(first + f, j * 4 + 2);
      const double my = window.at(first + f, j * 4 + 3);
      const double vals[4] = {
          mx != 0.0 ? (x - config.pixel_center_x) * inv : 0.0,
          my != 0.0 ? (y - config.pixel_center_y) * inv : 0.0, mx, my};
      for (int d = 0; d < dims; ++d)
        out[static_cast<std::size_t>(j * dims + d) * length + f] =
            static_cast<T>(vals[d]);
    }
  }
  return out;
}

GuidedWindow replicate_edges(const GuidedWindow& window, int pad) {
  if (window.frames < 1)
    throw Error(ErrorKind::kShapeMismatch, "cannot pad an empty window");
  GuidedWindow out;
  out.mode = window.mode;
  out.n_joints = window.n_joints;
  out.frames = window.frames + 2 * pad;
  const std::size_t stride = window.channel_count();
  out.channels.resize(static_cast<std::size_t>(out.frames) * stride);
  for (int f = 0; f < out.frames; ++f) {
    const int src = std::clamp(f - pad, 0, window.frames - 1);
    std::memcpy(out.channels.data() + f * stride,
                window.channels.data() + src * stride, stride * sizeof(double));
  }
  return out;
}

template <typename T>
std::vector<double> forward(LifterModel<T>& model, const GuidedWindow& window) {
  const int rf = model.receptive_field();
  if (window.frames < rf || window.frames % 2 == 0)
    throw Error(ErrorKind::kShapeMismatch,
                "window of " + std::to_string(window.frames) +
                    " frames: need an odd f >= " + std::to_string(rf));
  if (window.n_joints != model.topology().n_joints())
    throw Error(ErrorKind::kShapeMismatch, "window joint count mismatch");
  auto in = network_input<T>(model.config(), window, 0, window.frames);
  in.reshape({1, in.dim(0), in.dim(1)});
  nn::Tape<T> tape;
  auto out = model.forward(tape, tape.constant(std::move(in)));
  const auto& v = out.value();
  const std::size_t len = v.dim(2);
  const std::size_t mid = (len - 1) / 2;
  std::vector<double> pose(v.dim(1));
  for (std::size_t c = 0; c < v.dim(1); ++c) pose[c] = v[c * len + mid];
  return pose;
}

template <typename T>
PoseSequence predict_sequence(LifterModel<T>& model, const PoseSequence& seq2d,
                              const OcclusionMask& mask,
                              const ConfidenceTrack* confidence) {
  if (seq2d.topology().name() != model.config().topology)
    throw Error(ErrorKind::kShapeMismatch,
                "sequence topology " + seq2d.topology().name() +
                    " does not match model topology " + model.config().topology);
  const GuidedWindow guided = apply_guidance(seq2d, mask, confidence);
  const int pad = model.receptive_field() / 2;
  const GuidedWindow padded = replicate_edges(guided, pad);
  auto in = network_input<T>(model.config(), padded, 0, padded.frames);
  in.reshape({1, in.dim(0), in.dim(1)});

  // Only touch the mode when needed so concurrent eval-mode callers never write.
  const nn::Mode saved = model.mode();
  if (saved != nn::Mode::kEval) model.set_mode(nn::Mode::kEval);
  nn::Tape<T> tape;
  auto out = model.forward(tape, tape.constant(std::move(in)));
  if (saved != nn::Mode::kEval) model.set_mode(saved);

  const auto& v = out.value();
  const int frames = seq2d.frames();
  const int n = seq2d.n_joints();
  std::vector<double> coords(static_cast<std::size_t>(frames) * n * 3);
  for (int f = 0; f < frames; ++f)
    for (int c = 0; c < n * 3; ++c)
      coords[static_cast<std::size_t>(f) * n * 3 + c] =
          v[static_cast<std::size_t>(c) * frames + f];
  PoseSequence seq3d(seq2d.topology(), 3, std::move(coords));
  seq3d.fps = seq2d.fps;
  seq3d.action = seq2d.action;
  seq3d.subject = seq2d.subject;
  return seq3d;
}

template <typename T>
void save_checkpoint(const LifterModel<T>& model,
                     const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["schema"] = "t3dckpt/1";
  header["dtype"] = dtype_name<T>();
  header["config"] = config_to_json(model.config());
  std::vector<std::pair<std::string, const nn::Tensor<T>*>> tensors;
  for (const auto* p : model.parameters()) tensors.emplace_back(p->name, &p->value);
  for (const auto* bn : model.batchnorms()) {
    const std::string base = bn->gamma.name.substr(0, bn->gamma.name.size() - 6);
    tensors.emplace_back(base + ".running_mean", &bn->running_mean);
    tensors.emplace_back(base + ".running_var", &bn->running_var);
  }
  auto& list = header["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : tensors)
    list.push_back({{"name", name}, {"shape", t->shape()}});

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << header.dump() << '\n';
  for (const auto& [name, t] : tensors)
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(T)));
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

template <typename T>
LifterModel<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::kVersion,
                path.string() + ": unrecognized checkpoint header");
  }
  if (!header.is_object() || header.value("schema", "") != "t3dckpt/1")
    throw Error(ErrorKind::kVersion,
                path.string() + ": unsupported checkpoint version (want t3dckpt/1)");
  const std::string dtype = header.value("dtype", "f32");
  if (dtype != "f32" && dtype != "f64")
    throw Error(ErrorKind::kVersion, path.string() + ": unknown dtype " + dtype);
  LifterConfig config;
  try {
    config = config_from_json(header.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path.string() + ": bad config: " + e.what());
  }
  auto model = LifterModel<T>::build(config, 0);

  std::vector<std::pair<std::string, nn::Tensor<T>*>> tensors;
  for (auto* p : model.parameters()) tensors.emplace_back(p->name, &p->value);
  for (auto* bn : model.batchnorms()) {
    const std::string base = bn->gamma.name.substr(0, bn->gamma.name.size() - 6);
    tensors.emplace_back(base + ".running_mean", &bn->running_mean);
    tensors.emplace_back(base + ".running_var", &bn->running_var);
  }
  const auto& list = header.at("tensors");
  if (list.size() != tensors.size())
    throw Error(ErrorKind::kShapeMismatch,
                path.string() + ": checkpoint lists " +
                    std::to_string(list.size()) + " tensors, config implies " +
                    std::to_string(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& [name, t] = tensors[i];
    const auto shape = list[i].at("shape").get<std::vector<std::size_t>>();
    if (list[i].at("name").get<std::string>() != name || shape != t->shape())
      throw Error(ErrorKind::kShapeMismatch,
                  path.string() + ": tensor " + std::to_string(i) + " (" +
                      list[i].at("name").get<std::string>() +
                      ") does not match the embedded config");
  }
  for (const auto& [name, t] : tensors) {
    if (dtype == dtype_name<T>()) {
      in.read(reinterpret_cast<char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(T)));
    } else if (dtype == "f32") {
      std::vector<float> buf(t->size());
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
      for (std::size_t k = 0; k < buf.size(); ++k) (*t)[k] = static_cast<T>(buf[k]);
    } else {
      std::vector<double> buf(t->size());
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
      for (std::size_t k = 0; k < buf.size(); ++k) (*t)[k] = static_cast<T>(buf[k]);
    }
    if (!in)
      throw Error(ErrorKind::kShapeMismatch,
                  path.string() + ": truncated data for " + name);
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorKind::kShapeMismatch, path.string() + ": trailing bytes");
  return model;
}

template class LifterModel<float>;
template class LifterModel<double>;

#define OCCLIFT_INSTANTIATE(T)                                                 \
  template nn::Tensor<T> network_input<T>(const LifterConfig&,                 \
                                          const GuidedWindow&, int, int);      \
  template std::vector<double> forward<T>(LifterModel<T>&,                     \
                                          const GuidedWindow&);                \
  template PoseSequence predict_sequence<T>(LifterModel<T>&,                   \
                                            const PoseSequence&,               \
                                            const OcclusionMask&,              \
                                            const ConfidenceTrack*);           \
  template void save_checkpoint<T>(const LifterModel<T>&,                      \
                                   const std::filesystem::path&);              \
  template LifterModel<T> load_checkpoint<T>(const std::filesystem::path&);

OCCLIFT_INSTANTIATE(float)
OCCLIFT_INSTANTIATE(double)

#undef OCCLIFT_INSTANTIATE

}  // namespace occlift
