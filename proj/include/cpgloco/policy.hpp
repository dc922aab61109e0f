#pragma once

// Policy runtime: observation assembly, feedforward inference, action
// bounding and the CPGW1 weight file format.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cpgloco/cpg.hpp"
#include "cpgloco/heightmap_grid.hpp"
#include "cpgloco/rng.hpp"
#include "cpgloco/robot_state.hpp"

namespace cpgloco::policy {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { Elu, Tanh, Identity };

inline std::string_view activation_tag(Activation a) {
  switch (a) {
    case Activation::Elu: return "elu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

inline std::optional<Activation> parse_activation(std::string_view tag) {
  if (tag == "elu") return Activation::Elu;
  if (tag == "tanh") return Activation::Tanh;
  if (tag == "identity") return Activation::Identity;
  return std::nullopt;
}

struct Layer {
  RowMatrix weight;  // out x in
  VecX bias;         // out
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PolicyWeights {
  std::vector<Layer> layers;
  Activation activation = Activation::Elu;

  std::size_t in_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols()); }
  std::size_t out_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.rows()); }

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d;
    if (layers.empty()) return d;
    d.push_back(in_dim());
    for (const auto& l : layers) d.push_back(static_cast<std::size_t>(l.weight.rows()));
    return d;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// Throws DimensionError unless adjacent layers chain.
  void validate() const {
    if (layers.empty()) throw DimensionError("policy has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.weight.rows() == 0 || l.weight.cols() == 0) throw DimensionError("empty layer");
      if (l.bias.size() != l.weight.rows()) throw DimensionError("bias length does not match layer output");
      if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows())
        throw DimensionError("layer " + std::to_string(i) + " input does not match previous output");
    }
  }

  /// Flat parameter view in file order (per layer: weights row-major, then bias).
  VecX flatten() const {
    VecX out(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (const auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out[k++] = l.weight(r, c);
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) out[k++] = l.bias[r];
    }
    return out;
  }

  void unflatten(const VecX& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count()) throw DimensionError("flat parameter length mismatch");
    Eigen::Index k = 0;
    for (auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[k++];
    }
  }

  bool operator==(const PolicyWeights& o) const {
    if (activation != o.activation || layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].weight.rows() != o.layers[i].weight.rows() || layers[i].weight.cols() != o.layers[i].weight.cols())
        return false;
      if (std::memcmp(layers[i].weight.data(), o.layers[i].weight.data(),
                      sizeof(double) * static_cast<std::size_t>(layers[i].weight.size())) != 0)
        return false;
      if (std::memcmp(layers[i].bias.data(), o.layers[i].bias.data(),
                      sizeof(double) * static_cast<std::size_t>(layers[i].bias.size())) != 0)
        return false;
    }
    return true;
  }
};

/// Zero-initialised network with the given dimension chain.
inline PolicyWeights make_network(const std::vector<std::size_t>& dims, Activation act = Activation::Elu) {
  if (dims.size() < 2) throw DimensionError("dimension chain needs at least input and output");
  PolicyWeights w;
  w.activation = act;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] == 0 || dims[i + 1] == 0) throw DimensionError("zero-width layer");
    w.layers.push_back({RowMatrix::Zero(static_cast<Eigen::Index>(dims[i + 1]), static_cast<Eigen::Index>(dims[i])),
                        VecX::Zero(static_cast<Eigen::Index>(dims[i + 1]))});
  }
  return w;
}

/// He-style random initialisation. The output layer is scaled down so a
/// fresh policy starts near the middle of its action range.
inline PolicyWeights random_network(const std::vector<std::size_t>& dims, std::uint64_t seed,
                                    Activation act = Activation::Elu, double output_scale = 0.01) {
  PolicyWeights w = make_network(dims, act);
  Rng rng(seed);
  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    auto& l = w.layers[li];
    const double fan_in = static_cast<double>(l.weight.cols());
    double scale = std::sqrt(2.0 / fan_in);
    if (li + 1 == w.layers.size()) scale *= output_scale;
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = scale * rng.normal();
  }
  return w;
}

inline void apply_activation(VecX& v, Activation a) {
  switch (a) {
    case Activation::Elu:
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v[i] < 0.0) v[i] = std::expm1(v[i]);
      break;
    case Activation::Tanh:
      v = v.array().tanh().matrix();
      break;
    case Activation::Identity:
      break;
  }
}

/// Affine + activation chain; the last layer is linear.
inline VecX forward(const PolicyWeights& w, std::span<const double> x) {
  if (w.layers.empty()) throw DimensionError("forward: empty network");
  if (x.size() != w.in_dim())
    throw DimensionError("forward: input length " + std::to_string(x.size()) + " != " + std::to_string(w.in_dim()));
  VecX h = Eigen::Map<const VecX>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    VecX next = w.layers[i].weight * h + w.layers[i].bias;
    if (i + 1 < w.layers.size()) apply_activation(next, w.activation);
    h = std::move(next);
  }
  return h;
}

inline VecX forward(const PolicyWeights& w, const VecX& x) {
  return forward(w, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

// ---------------------------------------------------------------------------
// Action bounds

struct ActionBounds {
  VecX low;
  VecX high;

  std::size_t size() const { return static_cast<std::size_t>(low.size()); }
  bool valid() const { return low.size() == high.size() && (low.array() < high.array()).all(); }
};

inline constexpr std::size_t kSpinalActionDim = 8;
inline constexpr std::size_t kDescendingActionDim = 8;

/// (mu x4, nu x4): amplitude multiplier and intrinsic frequency in rad/s.
inline ActionBounds spinal_bounds(double mu_lo = 0.5, double mu_hi = 2.0, double nu_lo = 0.0, double nu_hi = 8.0 * kPi) {
  ActionBounds b{VecX(8), VecX(8)};
  b.low << mu_lo, mu_lo, mu_lo, mu_lo, nu_lo, nu_lo, nu_lo, nu_lo;
  b.high << mu_hi, mu_hi, mu_hi, mu_hi, nu_hi, nu_hi, nu_hi, nu_hi;
  return b;
}

/// (x_off x4, z_off x4) in metres.
inline ActionBounds descending_bounds(double x_max = 0.10, double z_max = 0.15) {
  ActionBounds b{VecX(8), VecX(8)};
  b.low << -x_max, -x_max, -x_max, -x_max, -z_max, -z_max, -z_max, -z_max;
  b.high << x_max, x_max, x_max, x_max, z_max, z_max, z_max, z_max;
  return b;
}

/// y = low + (tanh(raw) + 1) / 2 * (high - low)
inline VecX scale_action(const VecX& raw, const ActionBounds& bounds) {
  if (static_cast<std::size_t>(raw.size()) != bounds.size()) throw DimensionError("scale_action: size mismatch");
  if (!raw.allFinite()) throw CorruptedState("scale_action: non-finite raw action");
  VecX y(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    y[i] = bounds.low[i] + (std::tanh(raw[i]) + 1.0) / 2.0 * (bounds.high[i] - bounds.low[i]);
  }
  return y;
}

inline cpg::CpgIntrinsics to_intrinsics(const VecX& spinal_action, double alpha) {
  cpg::CpgIntrinsics intr;
  intr.mu = spinal_action.head<4>();
  intr.nu = spinal_action.segment<4>(4);
  intr.alpha = alpha;
  return intr;
}

// ---------------------------------------------------------------------------
// Observations

/// IMU group: projected gravity, body linear and angular velocity.
struct ImuReading {
  Vec3 e_g = Vec3(0.0, 0.0, -1.0);
  Vec3 v_b = Vec3::Zero();
  Vec3 omega_b = Vec3::Zero();
};

/// Proprioceptive group: joint positions, velocities and contact booleans.
struct JointReading {
  Vec12 q = Vec12::Zero();
  Vec12 q_dot = Vec12::Zero();
  Vec4 contacts = Vec4::Zero();
};

inline ImuReading read_imu(const RobotState& s) { return {s.e_g, s.v_b, s.omega_b}; }
inline JointReading read_joints(const RobotState& s) { return {s.q, s.q_dot, s.contacts()}; }

struct ObservationScales {
  double lin_vel = 2.0;
  double ang_vel = 0.25;
  double joint_vel = 0.05;
};

/// Offsets of each group in the 64-long spinal observation.
namespace spinal_layout {
inline constexpr std::size_t kCpg = 0;          // r, r_dot, theta, theta_dot (4 each)
inline constexpr std::size_t kPrevAction = 16;  // mu x4, nu x4
inline constexpr std::size_t kCommand = 24;     // v_x, v_y, yaw rate
inline constexpr std::size_t kContacts = 27;
inline constexpr std::size_t kBase = 31;        // e_g, v_b, omega_b
inline constexpr std::size_t kJoints = 40;      // q x12, q_dot x12
inline constexpr std::size_t kSize = 64;
}  // namespace spinal_layout

inline constexpr std::size_t kSpinalObsDim = spinal_layout::kSize;
inline constexpr std::size_t kDescendingObsDim = kSpinalObsDim + HeightmapGrid::kSize;

inline VecX build_spinal_obs(const ImuReading& imu, const JointReading& joints, const cpg::OscillatorState& osc,
                             const VecX& prev_action, const Vec3& command, const ObservationScales& sc = {}) {
  using namespace spinal_layout;
  if (prev_action.size() != static_cast<Eigen::Index>(kSpinalActionDim))
    throw DimensionError("build_spinal_obs: previous action must have 8 entries");
  VecX o(kSize);
  o.segment<4>(kCpg + 0) = osc.r;
  o.segment<4>(kCpg + 4) = osc.r_dot;
  o.segment<4>(kCpg + 8) = osc.theta;
  o.segment<4>(kCpg + 12) = osc.theta_dot;
  o.segment<8>(kPrevAction) = prev_action;
  o[kCommand + 0] = command.x() * sc.lin_vel;
  o[kCommand + 1] = command.y() * sc.lin_vel;
  o[kCommand + 2] = command.z() * sc.ang_vel;
  o.segment<4>(kContacts) = joints.contacts;
  o.segment<3>(kBase + 0) = imu.e_g;
  o.segment<3>(kBase + 3) = imu.v_b * sc.lin_vel;
  o.segment<3>(kBase + 6) = imu.omega_b * sc.ang_vel;
  o.segment<12>(kJoints) = joints.q;
  o.segment<12>(kJoints + 12) = joints.q_dot * sc.joint_vel;
  return o;
}

inline VecX build_spinal_obs(const RobotState& robot, const cpg::OscillatorState& osc, const VecX& prev_action,
                             const Vec3& command, const ObservationScales& sc = {}) {
  return build_spinal_obs(read_imu(robot), read_joints(robot), osc, prev_action, command, sc);
}

/// Spinal observation followed by the clipped 17x11 height map.
inline VecX build_desc_obs(const VecX& spinal_obs, std::span<const double> height_map) {
  if (spinal_obs.size() != static_cast<Eigen::Index>(kSpinalObsDim))
    throw DimensionError("build_desc_obs: spinal observation must have 64 entries");
  if (height_map.size() != HeightmapGrid::kSize)
    throw DimensionError("build_desc_obs: height map must have 187 entries, got " + std::to_string(height_map.size()));
  VecX o(kDescendingObsDim);
  o.head(kSpinalObsDim) = spinal_obs;
  for (std::size_t i = 0; i < height_map.size(); ++i)
    o[static_cast<Eigen::Index>(kSpinalObsDim + i)] = std::clamp(height_map[i], -HeightmapGrid::kClip, HeightmapGrid::kClip);
  return o;
}

inline VecX build_desc_obs(const VecX& spinal_obs, const VecX& height_map) {
  return build_desc_obs(spinal_obs, std::span<const double>(height_map.data(), static_cast<std::size_t>(height_map.size())));
}

// ---------------------------------------------------------------------------
// CPGW1 weight files
//
//   CPGW1\n
//   <activation tag>\n
//   <d0> <d1> ... <dn>\n
//   raw little-endian float64: per layer, weights row-major then bias

inline constexpr std::string_view kWeightMagic = "CPGW1";

class WeightFileError : public std::runtime_error {
 public:
  enum class Code { Io, BadMagic, BadActivation, DimensionChain, Truncated, TrailingData };

  WeightFileError(Code code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

namespace detail {

inline void put_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::string serialize_weights(const PolicyWeights& w) {
  w.validate();
  std::string out;
  out += kWeightMagic;
  out += '\n';
  out += activation_tag(w.activation);
  out += '\n';
  const auto d = w.dims();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(d[i]);
  }
  out += '\n';
  const VecX flat = w.flatten();
  out.reserve(out.size() + 8 * static_cast<std::size_t>(flat.size()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) detail::put_le(out, flat[i]);
  return out;
}

inline PolicyWeights deserialize_weights(const std::string& bytes) {
  using Code = WeightFileError::Code;
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) return false;
    line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return true;
  };
  std::string line;
  if (!next_line(line) || line != kWeightMagic) throw WeightFileError(Code::BadMagic, "weight file: bad magic");
  if (!next_line(line)) throw WeightFileError(Code::Truncated, "weight file: missing activation line");
  const auto act = parse_activation(line);
  if (!act) throw WeightFileError(Code::BadActivation, "weight file: unknown activation '" + line + "'");
  if (!next_line(line)) throw WeightFileError(Code::Truncated, "weight file: missing dimension line");

  std::vector<std::size_t> dims;
  {
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
      std::size_t used = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(tok, &used);
      } catch (const std::exception&) {
        throw WeightFileError(Code::DimensionChain, "weight file: bad dimension token '" + tok + "'");
      }
      if (used != tok.size() || v == 0 || tok[0] == '-')
        throw WeightFileError(Code::DimensionChain, "weight file: bad dimension token '" + tok + "'");
      dims.push_back(static_cast<std::size_t>(v));
    }
  }
  if (dims.size() < 2) throw WeightFileError(Code::DimensionChain, "weight file: dimension chain needs two or more entries");

  PolicyWeights w = make_network(dims, *act);
  const std::size_t n = w.parameter_count();
  const std::size_t avail = bytes.size() - pos;
  if (avail < 8 * n)
    throw WeightFileError(Code::Truncated, "weight file: payload has " + std::to_string(avail) + " bytes, expected " +
                                               std::to_string(8 * n));
  if (avail > 8 * n) throw WeightFileError(Code::TrailingData, "weight file: trailing bytes after payload");
  VecX flat(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) flat[static_cast<Eigen::Index>(i)] = detail::get_le(bytes.data() + pos + 8 * i);
  w.unflatten(flat);
  return w;
}

inline void save_weights(const PolicyWeights& w, const std::string& path) {
  const std::string bytes = serialize_weights(w);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw WeightFileError(WeightFileError::Code::Io, "cannot write weight file: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw WeightFileError(WeightFileError::Code::Io, "failed writing weight file: " + path);
}

inline PolicyWeights load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw WeightFileError(WeightFileError::Code::Io, "cannot open weight file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_weights(ss.str());
}

/// Load and check the input/output widths.
inline PolicyWeights load_weights(const std::string& path, std::size_t in_dim, std::size_t out_dim) {
  PolicyWeights w = load_weights(path);
  if (w.in_dim() != in_dim || w.out_dim() != out_dim)
    throw WeightFileError(WeightFileError::Code::DimensionChain,
                          path + ": network is " + std::to_string(w.in_dim()) + "->" + std::to_string(w.out_dim()) +
                              ", expected " + std::to_string(in_dim) + "->" + std::to_string(out_dim));
  return w;
}

/// FNV-1a over the serialized bytes; used to check frozen weights.
inline std::uint64_t weights_hash(const PolicyWeights& w) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_weights(w)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<std::size_t> spinal_dims(const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> d{kSpinalObsDim};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(kSpinalActionDim);
  return d;
}

inline std::vector<std::size_t> descending_dims(const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> d{kDescendingObsDim};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(kDescendingActionDim);
  return d;
}

}  // namespace cpgloco::policy
