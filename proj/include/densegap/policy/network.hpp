#pragma once

// Feed-forward actor and critic networks over the grid observation and the
// ego feature vector, with hand-written reverse-mode gradients.
//
//   grid (12 x W) -> conv1d -> tanh -> conv1d -> tanh -> flatten -> dense -> tanh
//   ego  (9)      -> dense -> tanh
//   concat -> dense -> tanh -> head
//
// Batches are column-major: one column per sample.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "densegap/env/environment.hpp"
#include "densegap/policy/beta.hpp"

namespace densegap::policy {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class HeadKind { BetaShapes, Linear };

struct NetSpec {
  int fov = 50;
  int grid_channels = env::kGridChannels * env::kGridRows;
  int conv1_out = 16, conv1_kernel = 5, conv1_stride = 2;
  int conv2_out = 16, conv2_kernel = 3, conv2_stride = 2;
  int grid_dense = 64;
  int ego_in = env::kEgoFeatures;
  int ego_dense = 64;
  int trunk = 128;
  int outputs = 4;
  HeadKind head = HeadKind::BetaShapes;

  bool operator==(const NetSpec&) const = default;

  int grid_width() const { return 2 * fov + 1; }
  int conv1_len() const { return (grid_width() - conv1_kernel) / conv1_stride + 1; }
  int conv2_len() const { return (conv1_len() - conv2_kernel) / conv2_stride + 1; }
  int flat() const { return conv2_out * conv2_len(); }
};

inline NetSpec actor_spec(int fov = 50) {
  NetSpec s;
  s.fov = fov;
  return s;
}

inline NetSpec critic_spec(int fov = 50) {
  NetSpec s;
  s.fov = fov;
  s.outputs = 1;
  s.head = HeadKind::Linear;
  return s;
}

inline void validate(const NetSpec& s) {
  auto positive = {s.fov, s.grid_channels, s.conv1_out, s.conv1_kernel, s.conv1_stride,
                   s.conv2_out, s.conv2_kernel, s.conv2_stride, s.grid_dense, s.ego_in,
                   s.ego_dense, s.trunk, s.outputs};
  for (int v : positive) {
    if (v <= 0) throw std::invalid_argument("network sizes must be positive");
  }
  if (s.grid_width() < s.conv1_kernel || s.conv1_len() < s.conv2_kernel)
    throw std::invalid_argument("grid too narrow for the convolution stack");
  if (s.head == HeadKind::BetaShapes && s.outputs != 4)
    throw std::invalid_argument("a Beta head needs exactly 4 outputs");
}

struct LayerShape {
  std::string name;
  int rows = 0;
  int cols = 0;

  bool operator==(const LayerShape&) const = default;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

inline std::vector<LayerShape> make_layout(const NetSpec& s) {
  return {
      {"conv1.w", s.conv1_out, s.grid_channels * s.conv1_kernel},
      {"conv1.b", s.conv1_out, 1},
      {"conv2.w", s.conv2_out, s.conv1_out * s.conv2_kernel},
      {"conv2.b", s.conv2_out, 1},
      {"grid_fc.w", s.grid_dense, s.flat()},
      {"grid_fc.b", s.grid_dense, 1},
      {"ego_fc.w", s.ego_dense, s.ego_in},
      {"ego_fc.b", s.ego_dense, 1},
      {"trunk.w", s.trunk, s.grid_dense + s.ego_dense},
      {"trunk.b", s.trunk, 1},
      {"head.w", s.outputs, s.trunk},
      {"head.b", s.outputs, 1},
  };
}

inline std::size_t layout_size(const std::vector<LayerShape>& layout) {
  std::size_t n = 0;
  for (const auto& l : layout) n += l.size();
  return n;
}

/// Flat weights plus the layout they follow.
struct ParameterBlock {
  NetSpec spec;
  std::vector<LayerShape> layout;
  VectorXd values;

  std::size_t parameter_count() const { return static_cast<std::size_t>(values.size()); }
  bool operator==(const ParameterBlock& o) const {
    return spec == o.spec && layout == o.layout && values.size() == o.values.size() &&
           (values.array() == o.values.array()).all();
  }
};

struct Inputs {
  MatrixXd grid;  // (grid_channels * width) x N
  MatrixXd ego;   // ego_in x N

  Eigen::Index batch() const { return grid.cols(); }
};

inline Inputs make_inputs(const std::vector<const env::Observation*>& obs) {
  if (obs.empty()) throw std::invalid_argument("empty observation batch");
  const Eigen::Index g = static_cast<Eigen::Index>(obs.front()->grid.size());
  Inputs in;
  in.grid.resize(g, static_cast<Eigen::Index>(obs.size()));
  in.ego.resize(env::kEgoFeatures, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t n = 0; n < obs.size(); ++n) {
    if (static_cast<Eigen::Index>(obs[n]->grid.size()) != g)
      throw std::invalid_argument("observation grids differ in size");
    in.grid.col(static_cast<Eigen::Index>(n)) =
        Eigen::Map<const VectorXd>(obs[n]->grid.data(), g);
    in.ego.col(static_cast<Eigen::Index>(n)) =
        Eigen::Map<const VectorXd>(obs[n]->ego.data(), env::kEgoFeatures);
  }
  return in;
}

inline Inputs make_inputs(const env::Observation& obs) { return make_inputs({&obs}); }

namespace detail {

inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// im2col for a stride-s, kernel-k convolution. x is C x (N * len_in) with
// column n * len_in + t; the result is (C * k) x (N * len_out).
inline MatrixXd im2col(const MatrixXd& x, Eigen::Index n, int len_in, int k, int s) {
  const Eigen::Index c = x.rows();
  const int len_out = (len_in - k) / s + 1;
  MatrixXd cols(c * k, n * len_out);
  for (Eigen::Index b = 0; b < n; ++b) {
    for (int t = 0; t < len_out; ++t) {
      const Eigen::Index out_col = b * len_out + t;
      for (int j = 0; j < k; ++j) {
        const Eigen::Index in_col = b * len_in + t * s + j;
        for (Eigen::Index ci = 0; ci < c; ++ci) cols(ci * k + j, out_col) = x(ci, in_col);
      }
    }
  }
  return cols;
}

inline MatrixXd col2im(const MatrixXd& cols, Eigen::Index c, Eigen::Index n, int len_in,
                       int k, int s) {
  const int len_out = (len_in - k) / s + 1;
  MatrixXd x = MatrixXd::Zero(c, n * len_in);
  for (Eigen::Index b = 0; b < n; ++b) {
    for (int t = 0; t < len_out; ++t) {
      const Eigen::Index out_col = b * len_out + t;
      for (int j = 0; j < k; ++j) {
        const Eigen::Index in_col = b * len_in + t * s + j;
        for (Eigen::Index ci = 0; ci < c; ++ci) x(ci, in_col) += cols(ci * k + j, out_col);
      }
    }
  }
  return x;
}

// tanh via the vectorised exp: sign(z) (1 - e) / (1 + e), e = exp(-2|z|).
inline MatrixXd tanh_of(const MatrixXd& z) {
  const Eigen::ArrayXXd e = (-2.0 * z.array().abs()).exp();
  return (z.array().sign() * (1.0 - e) / (1.0 + e)).matrix();
}

inline MatrixXd tanh_backward(const MatrixXd& y, const MatrixXd& dy) {
  return (dy.array() * (1.0 - y.array().square())).matrix();
}

}  // namespace detail

class Network {
 public:
  explicit Network(NetSpec spec) : spec_(spec), layout_(make_layout(spec)) {
    validate(spec_);
    std::size_t off = 0;
    for (const auto& l : layout_) {
      offsets_.push_back(off);
      off += l.size();
    }
    count_ = off;
  }

  const NetSpec& spec() const { return spec_; }
  const std::vector<LayerShape>& layout() const { return layout_; }
  std::size_t parameter_count() const { return count_; }

  ParameterBlock zeros() const {
    return {spec_, layout_, VectorXd::Zero(static_cast<Eigen::Index>(count_))};
  }

  /// Gaussian initialisation scaled by fan-in; the head starts small so the
  /// initial policy is close to uniform shapes and the critic close to zero.
  ParameterBlock init(std::uint64_t seed, double head_gain = 0.01) const {
    ParameterBlock p = zeros();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      const auto& l = layout_[i];
      if (l.cols == 1 && l.name.ends_with(".b")) continue;
      const double gain = l.name == "head.w" ? head_gain : 1.0;
      const double scale = gain / std::sqrt(static_cast<double>(l.cols));
      for (std::size_t k = 0; k < l.size(); ++k) {
        p.values[static_cast<Eigen::Index>(offsets_[i] + k)] = scale * normal(rng);
      }
    }
    return p;
  }

  /// Offset of the named layer inside the flat parameter vector.
  std::size_t offset_of(const std::string& name) const {
    for (std::size_t i = 0; i < layout_.size(); ++i)
      if (layout_[i].name == name) return offsets_[i];
    throw std::invalid_argument("no layer named '" + name + "'");
  }

  void set_head_bias(ParameterBlock& p, const VectorXd& bias) const {
    check(p);
    if (bias.size() != spec_.outputs) throw std::invalid_argument("head bias size mismatch");
    p.values.segment(static_cast<Eigen::Index>(offset_of("head.b")), bias.size()) = bias;
  }

  void check(const ParameterBlock& p) const {
    if (!(p.spec == spec_) || p.layout != layout_ ||
        p.parameter_count() != count_)
      throw std::invalid_argument("parameter block does not match the network layout");
  }

  struct Cache {
    Eigen::Index n = 0;
    MatrixXd cols1, y1, cols2, y2, flat, g, e, concat, h, z_head;
  };

  /// Output is outputs x N: Beta shapes (>= 1) or linear values.
  MatrixXd forward(const ParameterBlock& p, const Inputs& in, Cache* cache = nullptr) const {
    check(p);
    const NetSpec& s = spec_;
    const Eigen::Index n = in.batch();
    const int w = s.grid_width();
    if (in.grid.rows() != s.grid_channels * w || in.ego.rows() != s.ego_in ||
        in.ego.cols() != n)
      throw std::invalid_argument("input shape does not match the network");

    // Grid as channels x (N * width).
    MatrixXd x(s.grid_channels, n * w);
    for (Eigen::Index b = 0; b < n; ++b) {
      x.block(0, b * w, s.grid_channels, w) =
          Eigen::Map<const MatrixXd>(in.grid.col(b).data(), w, s.grid_channels).transpose();
    }

    Cache local;
    Cache& c = cache ? *cache : local;
    c.n = n;
    c.cols1 = detail::im2col(x, n, w, s.conv1_kernel, s.conv1_stride);
    c.y1 = detail::tanh_of((mat(p, 0) * c.cols1).colwise() + vec(p, 1));
    c.cols2 = detail::im2col(c.y1, n, s.conv1_len(), s.conv2_kernel, s.conv2_stride);
    c.y2 = detail::tanh_of((mat(p, 2) * c.cols2).colwise() + vec(p, 3));

    const int l2 = s.conv2_len();
    c.flat.resize(s.flat(), n);
    for (Eigen::Index b = 0; b < n; ++b) {
      MatrixXd block = c.y2.block(0, b * l2, s.conv2_out, l2).transpose();
      c.flat.col(b) = Eigen::Map<const VectorXd>(block.data(), s.flat());
    }

    c.g = detail::tanh_of((mat(p, 4) * c.flat).colwise() + vec(p, 5));
    c.e = detail::tanh_of((mat(p, 6) * in.ego).colwise() + vec(p, 7));
    c.concat.resize(s.grid_dense + s.ego_dense, n);
    c.concat.topRows(s.grid_dense) = c.g;
    c.concat.bottomRows(s.ego_dense) = c.e;
    c.h = detail::tanh_of((mat(p, 8) * c.concat).colwise() + vec(p, 9));
    c.z_head = (mat(p, 10) * c.h).colwise() + vec(p, 11);

    if (s.head == HeadKind::Linear) return c.z_head;
    return c.z_head.unaryExpr([](double z) { return 1.0 + detail::softplus(z); });
  }

  /// Gradient of sum(d_out .* output) with respect to the parameters.
  VectorXd backward(const ParameterBlock& p, const Inputs& in, const Cache& c,
                    const MatrixXd& d_out) const {
    const NetSpec& s = spec_;
    VectorXd grad = VectorXd::Zero(static_cast<Eigen::Index>(count_));

    MatrixXd dz = d_out;
    if (s.head == HeadKind::BetaShapes) {
      dz = (d_out.array() * c.z_head.unaryExpr(&detail::sigmoid).array()).matrix();
    }
    accumulate(grad, 10, 11, dz, c.h);
    MatrixXd dh = mat(p, 10).transpose() * dz;

    MatrixXd dz_trunk = detail::tanh_backward(c.h, dh);
    accumulate(grad, 8, 9, dz_trunk, c.concat);
    MatrixXd dconcat = mat(p, 8).transpose() * dz_trunk;

    MatrixXd dz_ego = detail::tanh_backward(c.e, dconcat.bottomRows(s.ego_dense));
    accumulate(grad, 6, 7, dz_ego, in.ego);

    MatrixXd dz_g = detail::tanh_backward(c.g, dconcat.topRows(s.grid_dense));
    accumulate(grad, 4, 5, dz_g, c.flat);
    MatrixXd dflat = mat(p, 4).transpose() * dz_g;

    const int l2 = s.conv2_len();
    MatrixXd dy2(s.conv2_out, c.n * l2);
    for (Eigen::Index b = 0; b < c.n; ++b) {
      dy2.block(0, b * l2, s.conv2_out, l2) =
          Eigen::Map<const MatrixXd>(dflat.col(b).data(), l2, s.conv2_out).transpose();
    }
    MatrixXd dz2 = detail::tanh_backward(c.y2, dy2);
    accumulate(grad, 2, 3, dz2, c.cols2);
    MatrixXd dcols2 = mat(p, 2).transpose() * dz2;
    MatrixXd dy1 = detail::col2im(dcols2, s.conv1_out, c.n, s.conv1_len(), s.conv2_kernel,
                                  s.conv2_stride);
    MatrixXd dz1 = detail::tanh_backward(c.y1, dy1);
    accumulate(grad, 0, 1, dz1, c.cols1);
    return grad;
  }

 private:
  Eigen::Map<const MatrixXd> mat(const ParameterBlock& p, std::size_t i) const {
    return {p.values.data() + offsets_[i], layout_[i].rows, layout_[i].cols};
  }
  Eigen::Map<const VectorXd> vec(const ParameterBlock& p, std::size_t i) const {
    return {p.values.data() + offsets_[i], layout_[i].rows};
  }

  void accumulate(VectorXd& grad, std::size_t wi, std::size_t bi, const MatrixXd& dz,
                  const MatrixXd& input) const {
    Eigen::Map<MatrixXd>(grad.data() + offsets_[wi], layout_[wi].rows, layout_[wi].cols) +=
        dz * input.transpose();
    Eigen::Map<VectorXd>(grad.data() + offsets_[bi], layout_[bi].rows) += dz.rowwise().sum();
  }

  NetSpec spec_;
  std::vector<LayerShape> layout_;
  std::vector<std::size_t> offsets_;
  std::size_t count_ = 0;
};

/// Head bias giving Beta shapes (alpha_j, beta_j, alpha_s, beta_s) when the
/// head weights are zero: inverse of softplus(z) + 1.
inline VectorXd beta_head_bias(const BetaPair& shapes) {
  auto inv = [](double shape) { return std::log(std::expm1(shape - 1.0)); };
  VectorXd b(4);
  b << inv(shapes.alpha_j), inv(shapes.beta_j), inv(shapes.alpha_s), inv(shapes.beta_s);
  return b;
}

inline BetaPair to_beta_pair(const MatrixXd& out, Eigen::Index col) {
  return {out(0, col), out(1, col), out(2, col), out(3, col)};
}

}  // namespace densegap::policy
