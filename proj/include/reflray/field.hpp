#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "reflray/autodiff.hpp"
#include "reflray/common.hpp"
#include "reflray/rng.hpp"
#include "reflray/vec3.hpp"

// Scene representation: a spatial MLP trunk emitting density, a bottleneck
// feature and per-channel Laplacian scales, plus a direction-conditioned head
// emitting RGB locations. Evaluation is templated on the scalar type, so the
// same code runs on plain doubles (inference) and on tape variables
// (training); density gradients come from forward-mode duals nested in
// whichever scalar type is active.

namespace reflray {

struct FieldConfig {
  int trunk_depth = 4;
  int trunk_width = 128;
  int skip_layer = 2;  // trunk layer whose input re-concatenates the encoding
  int head_depth = 1;
  int head_width = 64;
  int bottleneck_dim = 128;
  int l_pos = 8;
  int l_dir = 4;
  double beta_floor = 1e-3;
  double normal_eps = 1e-8;

  int enc_x_dim() const { return 3 + 6 * l_pos; }
  int enc_d_dim() const { return 3 + 6 * l_dir; }

  bool operator==(const FieldConfig&) const = default;
};

struct FieldParams {
  FieldConfig cfg;
  ad::ParamBook book;

  std::vector<std::uint32_t> trunk_w, trunk_b;
  std::uint32_t sigma_w = 0, sigma_b = 0;
  std::uint32_t bneck_w = 0, bneck_b = 0;
  std::uint32_t beta_w = 0, beta_b = 0;
  std::vector<std::uint32_t> head_w, head_b;
  std::uint32_t rgb_w = 0, rgb_b = 0;
};

inline int trunk_layer_in_dim(const FieldConfig& cfg, int layer) {
  if (layer == 0) return cfg.enc_x_dim();
  if (layer == cfg.skip_layer) return cfg.trunk_width + cfg.enc_x_dim();
  return cfg.trunk_width;
}

inline int head_layer_in_dim(const FieldConfig& cfg, int layer) {
  if (layer == 0) return cfg.bottleneck_dim + cfg.enc_d_dim();
  return cfg.head_width;
}

inline FieldParams make_field_params(const FieldConfig& cfg) {
  FieldParams p;
  p.cfg = cfg;
  auto matrix = [&](const std::string& name, int rows, int cols) {
    return p.book.add_tensor(name, static_cast<std::size_t>(rows),
                             static_cast<std::size_t>(cols));
  };
  auto bias = [&](const std::string& name, int rows) {
    return p.book.add_tensor(name, static_cast<std::size_t>(rows), 0);
  };
  for (int i = 0; i < cfg.trunk_depth; ++i) {
    p.trunk_w.push_back(matrix("trunk" + std::to_string(i) + "_w",
                               cfg.trunk_width, trunk_layer_in_dim(cfg, i)));
    p.trunk_b.push_back(bias("trunk" + std::to_string(i) + "_b",
                             cfg.trunk_width));
  }
  p.sigma_w = matrix("sigma_w", 1, cfg.trunk_width);
  p.sigma_b = bias("sigma_b", 1);
  p.bneck_w = matrix("bneck_w", cfg.bottleneck_dim, cfg.trunk_width);
  p.bneck_b = bias("bneck_b", cfg.bottleneck_dim);
  p.beta_w = matrix("beta_w", 3, cfg.trunk_width);
  p.beta_b = bias("beta_b", 3);
  for (int i = 0; i < cfg.head_depth; ++i) {
    p.head_w.push_back(matrix("head" + std::to_string(i) + "_w",
                              cfg.head_width, head_layer_in_dim(cfg, i)));
    p.head_b.push_back(bias("head" + std::to_string(i) + "_b",
                            cfg.head_width));
  }
  const int rgb_in = cfg.head_depth > 0
                         ? cfg.head_width
                         : cfg.bottleneck_dim + cfg.enc_d_dim();
  p.rgb_w = matrix("rgb_w", 3, rgb_in);
  p.rgb_b = bias("rgb_b", 3);
  return p;
}

// Kaiming-style uniform fan-in init for weight matrices, zero biases.
inline void init_field_params(FieldParams& p, std::uint64_t seed) {
  for (std::uint32_t t = 0; t < p.book.tensor_count(); ++t) {
    const ad::TensorSpec& spec = p.book.spec(t);
    double* data = p.book.data(t);
    if (spec.cols == 0) {
      for (std::size_t i = 0; i < spec.rows; ++i) data[i] = 0.0;
      continue;
    }
    Rng rng = Rng::from_stream(seed, 0xf1e1d, t);
    const double bound = std::sqrt(6.0 / static_cast<double>(spec.cols));
    for (std::size_t i = 0; i < spec.rows * spec.cols; ++i) {
      data[i] = rng.uniform(-bound, bound);
    }
  }
}

// --------------------------------------------------------------------------
// Dense layer application per scalar type.

inline void dense_apply(const FieldParams& p, ad::Tape*, std::uint32_t w,
                        std::uint32_t b, std::span<const double> in,
                        std::vector<double>& out) {
  const ad::TensorSpec& ws = p.book.spec(w);
  const double* wm = p.book.data(w);
  const double* bv = b == ad::kNoTensor ? nullptr : p.book.data(b);
  out.resize(ws.rows);
  for (std::size_t r = 0; r < ws.rows; ++r) {
    double acc = bv ? bv[r] : 0.0;
    const double* wr = wm + r * ws.cols;
    for (std::size_t c = 0; c < ws.cols; ++c) acc += wr[c] * in[c];
    out[r] = acc;
  }
}

inline void dense_apply(const FieldParams& p, ad::Tape* tape, std::uint32_t w,
                        std::uint32_t b, std::span<const ad::Var> in,
                        std::vector<ad::Var>& out) {
  const ad::TensorSpec& ws = p.book.spec(w);
  std::vector<ad::VarId> ids(in.size());
  std::vector<double> vals(in.size());
  for (std::size_t c = 0; c < in.size(); ++c) {
    ids[c] = in[c].is_literal() ? ad::kNoVar : in[c].id;
    vals[c] = in[c].v;
  }
  const ad::VarId first = tape->dense(w, b, ids, vals);
  out.resize(ws.rows);
  for (std::size_t r = 0; r < ws.rows; ++r) {
    out[r] = ad::Var(tape, first + static_cast<ad::VarId>(r));
  }
}

template <class T, int N>
inline void dense_apply(const FieldParams& p, ad::Tape* tape, std::uint32_t w,
                        std::uint32_t b,
                        std::span<const ad::Dual<T, N>> in,
                        std::vector<ad::Dual<T, N>>& out) {
  const ad::TensorSpec& ws = p.book.spec(w);
  std::vector<T> part(in.size());
  std::vector<T> res;
  out.resize(ws.rows);
  for (std::size_t c = 0; c < in.size(); ++c) part[c] = in[c].v;
  dense_apply(p, tape, w, b, std::span<const T>(part), res);
  for (std::size_t r = 0; r < ws.rows; ++r) out[r].v = res[r];
  for (int k = 0; k < N; ++k) {
    for (std::size_t c = 0; c < in.size(); ++c) part[c] = in[c].t[k];
    dense_apply(p, tape, w, ad::kNoTensor, std::span<const T>(part), res);
    for (std::size_t r = 0; r < ws.rows; ++r) out[r].t[k] = res[r];
  }
}

// --------------------------------------------------------------------------
// Positional encoding: for each frequency l in [0, L), sin(2^l pi v) over all
// components followed by cos(2^l pi v). L = 0 yields an empty vector.
template <class S>
inline void positional_encode(std::span<const S> v, int L,
                              std::vector<S>& out) {
  require(L >= 0, "positional_encode: L must be nonnegative");
  using ad::cos;
  using ad::sin;
  out.clear();
  out.reserve(2 * static_cast<std::size_t>(L) * v.size());
  double freq = kPi;
  for (int l = 0; l < L; ++l) {
    for (const S& c : v) out.push_back(sin(freq * c));
    for (const S& c : v) out.push_back(cos(freq * c));
    freq *= 2.0;
  }
}

// Raw inputs appended ahead of the encoding: [v, gamma(v)].
template <class S>
inline void encode_with_raw(std::span<const S> v, int L, std::vector<S>& out) {
  out.assign(v.begin(), v.end());
  std::vector<S> enc;
  positional_encode(v, L, enc);
  out.insert(out.end(), enc.begin(), enc.end());
}

template <class S>
struct TrunkOut {
  S sigma{};
  std::vector<S> bneck;
  std::array<S, 3> beta{};
};

template <class S>
struct NormalOut {
  Vec3<S> n{};
  Vec3<S> grad_sigma{};
  bool degenerate = false;
};

namespace detail {

template <class S>
inline void check_finite_layer(const std::vector<S>& h, const char* name) {
  using ad::value_of;
  for (const S& x : h) {
    if (!std::isfinite(value_of(x))) {
      throw NumericError(std::string("field: non-finite activation in ") +
                         name);
    }
  }
}

// Shared trunk body: encodes x, runs the hidden layers, returns the last
// hidden activation vector.
template <class S>
inline std::vector<S> trunk_hidden(const FieldParams& p, ad::Tape* tape,
                                   const std::array<S, 3>& x) {
  using ad::softplus;
  std::vector<S> enc;
  encode_with_raw(std::span<const S>(x), p.cfg.l_pos, enc);
  std::vector<S> h, z;
  for (int i = 0; i < p.cfg.trunk_depth; ++i) {
    std::vector<S> in;
    if (i == 0) {
      in = enc;
    } else if (i == p.cfg.skip_layer) {
      in = h;
      in.insert(in.end(), enc.begin(), enc.end());
    } else {
      in = h;
    }
    dense_apply(p, tape, p.trunk_w[static_cast<std::size_t>(i)],
                p.trunk_b[static_cast<std::size_t>(i)],
                std::span<const S>(in), z);
    h.resize(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) h[j] = softplus(z[j]);
    check_finite_layer(h, ("trunk" + std::to_string(i)).c_str());
  }
  return h;
}

template <class S>
inline TrunkOut<S> trunk_heads(const FieldParams& p, ad::Tape* tape,
                               const std::vector<S>& h, const S& raw_sigma) {
  using ad::softplus;
  TrunkOut<S> out;
  out.sigma = softplus(raw_sigma);
  dense_apply(p, tape, p.bneck_w, p.bneck_b, std::span<const S>(h), out.bneck);
  std::vector<S> raw_beta;
  dense_apply(p, tape, p.beta_w, p.beta_b, std::span<const S>(h), raw_beta);
  for (int c = 0; c < 3; ++c) {
    out.beta[static_cast<std::size_t>(c)] =
        softplus(raw_beta[static_cast<std::size_t>(c)]) + S(p.cfg.beta_floor);
  }
  return out;
}

}  // namespace detail

// sigma = softplus(raw), beta = softplus(raw) + beta_floor, b = linear
// bottleneck projection (no activation, no direction conditioning).
template <class S>
inline TrunkOut<S> trunk_forward(const FieldParams& p, ad::Tape* tape,
                                 const Vec3<S>& x) {
  const std::array<S, 3> xa{x.x, x.y, x.z};
  std::vector<S> h = detail::trunk_hidden(p, tape, xa);
  std::vector<S> raw_sigma;
  dense_apply(p, tape, p.sigma_w, p.sigma_b, std::span<const S>(h), raw_sigma);
  return detail::trunk_heads(p, tape, h, raw_sigma[0]);
}

// Trunk pass that additionally carries d sigma / d x through a 3-direction
// dual, so the density gradient (and hence the normal) lands on the tape.
template <class S>
inline void trunk_forward_with_normal(const FieldParams& p, ad::Tape* tape,
                                      const Vec3<S>& x, TrunkOut<S>& trunk,
                                      NormalOut<S>& normal) {
  using D = ad::Dual<S, 3>;
  std::array<D, 3> xd;
  for (int i = 0; i < 3; ++i) {
    xd[static_cast<std::size_t>(i)].v = x[i];
    for (int k = 0; k < 3; ++k) {
      xd[static_cast<std::size_t>(i)].t[static_cast<std::size_t>(k)] =
          S(i == k ? 1.0 : 0.0);
    }
  }
  std::vector<D> hd = detail::trunk_hidden(p, tape, xd);
  std::vector<D> raw_sigma_d;
  dense_apply(p, tape, p.sigma_w, p.sigma_b, std::span<const D>(hd),
              raw_sigma_d);
  using ad::softplus;
  const D sigma_d = softplus(raw_sigma_d[0]);

  std::vector<S> h(hd.size());
  for (std::size_t i = 0; i < hd.size(); ++i) h[i] = hd[i].v;
  trunk = detail::trunk_heads(p, tape, h, raw_sigma_d[0].v);

  normal.grad_sigma = Vec3<S>(sigma_d.t[0], sigma_d.t[1], sigma_d.t[2]);
  const Vec3d g = value_of(normal.grad_sigma);
  if (norm(g) < p.cfg.normal_eps) {
    normal.n = Vec3<S>(S(0.0), S(0.0), S(0.0));
    normal.degenerate = true;
  } else {
    normal.n = normalize_guarded(-normal.grad_sigma, p.cfg.normal_eps);
    normal.degenerate = false;
  }
}

// n = -grad(sigma) / max(||grad(sigma)||, eps_n); a gradient below eps_n is
// flagged degenerate and returned as the zero vector.
template <class S>
inline NormalOut<S> density_normal(const FieldParams& p, ad::Tape* tape,
                                   const Vec3<S>& x) {
  TrunkOut<S> trunk;
  NormalOut<S> normal;
  trunk_forward_with_normal(p, tape, x, trunk, normal);
  return normal;
}

template <class S>
struct ColorOut {
  std::array<S, 3> mu{};
  std::vector<S> b_dir;
};

// mu = sigmoid(head([b, d_hat, gamma(d_hat)])); also exposes the head's
// penultimate feature. d_hat must be unit length.
template <class S>
inline ColorOut<S> color_head(const FieldParams& p, ad::Tape* tape,
                              const std::vector<S>& bneck,
                              const Vec3<S>& d_hat) {
  using ad::sigmoid;
  using ad::softplus;
  const Vec3d dv = value_of(d_hat);
  require(std::fabs(norm(dv) - 1.0) <= 1e-6,
          "color_head: d_hat must be unit length");
  require(static_cast<int>(bneck.size()) == p.cfg.bottleneck_dim,
          "color_head: bottleneck dimension mismatch");

  const std::array<S, 3> da{d_hat.x, d_hat.y, d_hat.z};
  std::vector<S> in(bneck.begin(), bneck.end());
  std::vector<S> enc_d;
  encode_with_raw(std::span<const S>(da), p.cfg.l_dir, enc_d);
  in.insert(in.end(), enc_d.begin(), enc_d.end());

  ColorOut<S> out;
  std::vector<S> h = in, z;
  for (int i = 0; i < p.cfg.head_depth; ++i) {
    dense_apply(p, tape, p.head_w[static_cast<std::size_t>(i)],
                p.head_b[static_cast<std::size_t>(i)], std::span<const S>(h),
                z);
    h.resize(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) h[j] = softplus(z[j]);
    detail::check_finite_layer(h, ("head" + std::to_string(i)).c_str());
  }
  out.b_dir = h;
  std::vector<S> raw_rgb;
  dense_apply(p, tape, p.rgb_w, p.rgb_b, std::span<const S>(h), raw_rgb);
  for (int c = 0; c < 3; ++c) {
    out.mu[static_cast<std::size_t>(c)] =
        sigmoid(raw_rgb[static_cast<std::size_t>(c)]);
  }
  return out;
}

// --------------------------------------------------------------------------
// Checkpoint: one text header line (version tag, config, tensor shapes)
// followed by the flat parameter vector as little-endian 64-bit reals.

inline constexpr const char* kCheckpointTag = "reflray-ckpt-1";

inline void save_checkpoint(const FieldParams& p, const std::string& path) {
  std::ostringstream header;
  header << kCheckpointTag;
  const FieldConfig& c = p.cfg;
  header << " trunk_depth=" << c.trunk_depth << " trunk_width=" << c.trunk_width
         << " skip_layer=" << c.skip_layer << " head_depth=" << c.head_depth
         << " head_width=" << c.head_width
         << " bottleneck_dim=" << c.bottleneck_dim << " l_pos=" << c.l_pos
         << " l_dir=" << c.l_dir;
  char buf[64];
  std::snprintf(buf, sizeof buf, " beta_floor=%.17g", c.beta_floor);
  header << buf;
  std::snprintf(buf, sizeof buf, " normal_eps=%.17g", c.normal_eps);
  header << buf;
  for (std::uint32_t t = 0; t < p.book.tensor_count(); ++t) {
    const ad::TensorSpec& s = p.book.spec(t);
    header << " " << s.name << ":" << s.rows << "x" << s.cols;
  }
  header << "\n";

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + tmp);
    const std::string h = header.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.write(reinterpret_cast<const char*>(p.book.flat().data()),
              static_cast<std::streamsize>(p.book.flat().size() *
                                           sizeof(double)));
    if (!out) throw IoError("short write on checkpoint: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot move checkpoint into place: " + path);
  }
}

inline FieldParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string header;
  if (!std::getline(in, header)) {
    throw IoError("checkpoint missing header: " + path);
  }
  std::istringstream hs(header);
  std::string tag;
  hs >> tag;
  if (tag != kCheckpointTag) {
    throw IoError("checkpoint version mismatch: expected '" +
                  std::string(kCheckpointTag) + "', got '" + tag + "'");
  }
  FieldConfig cfg;
  std::vector<std::string> shape_tokens;
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos && tok.find(':') == std::string::npos) {
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "trunk_depth") cfg.trunk_depth = std::stoi(val);
      else if (key == "trunk_width") cfg.trunk_width = std::stoi(val);
      else if (key == "skip_layer") cfg.skip_layer = std::stoi(val);
      else if (key == "head_depth") cfg.head_depth = std::stoi(val);
      else if (key == "head_width") cfg.head_width = std::stoi(val);
      else if (key == "bottleneck_dim") cfg.bottleneck_dim = std::stoi(val);
      else if (key == "l_pos") cfg.l_pos = std::stoi(val);
      else if (key == "l_dir") cfg.l_dir = std::stoi(val);
      else if (key == "beta_floor") cfg.beta_floor = std::stod(val);
      else if (key == "normal_eps") cfg.normal_eps = std::stod(val);
      else throw IoError("checkpoint header: unknown key '" + key + "'");
    } else {
      shape_tokens.push_back(tok);
    }
  }

  FieldParams p = make_field_params(cfg);
  if (shape_tokens.size() != p.book.tensor_count()) {
    throw IoError("checkpoint header: tensor count mismatch");
  }
  for (std::uint32_t t = 0; t < p.book.tensor_count(); ++t) {
    const ad::TensorSpec& s = p.book.spec(t);
    std::ostringstream want;
    want << s.name << ":" << s.rows << "x" << s.cols;
    if (shape_tokens[t] != want.str()) {
      throw IoError("checkpoint header: shape mismatch at '" +
                    shape_tokens[t] + "', expected '" + want.str() + "'");
    }
  }
  in.read(reinterpret_cast<char*>(p.book.flat().data()),
          static_cast<std::streamsize>(p.book.flat().size() * sizeof(double)));
  if (in.gcount() !=
      static_cast<std::streamsize>(p.book.flat().size() * sizeof(double))) {
    throw IoError("checkpoint truncated: " + path);
  }
  for (double v : p.book.flat()) {
    if (!std::isfinite(v)) throw IoError("checkpoint has non-finite values");
  }
  return p;
}

}  // namespace reflray
