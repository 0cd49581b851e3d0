// Copyright 2026 The rm3d Authors
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

#include "rm3d/diffusion/unet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "rm3d/core/error.hpp"
#include "rm3d/core/rm3d_format.hpp"
#include "rm3d/core/rng.hpp"
#include "rm3d/core/text.hpp"

namespace rm3d::diffusion {

namespace {

using T4 = Tensor<double>;

std::string_view kind_keyword(LayerKind k) {
  switch (k) {
    case LayerKind::Conv3d:
      return "conv3d";
    case LayerKind::Act:
      return "act";
    case LayerKind::ResBlock:
      return "resblock";
    case LayerKind::Film:
      return "film";
    case LayerKind::CrossAttn:
      return "xattn";
    case LayerKind::Down:
      return "down";
    case LayerKind::Up:
      return "up";
    case LayerKind::Save:
      return "save";
    case LayerKind::Concat:
      return "concat";
  }
  return "?";
}

std::string layer_label(const DenoiserSpec& spec, std::size_t index) {
  const LayerSpec& l = spec.layers[index];
  std::string s = "layer " + std::to_string(index) + " (" + std::string(kind_keyword(l.kind));
  if (!l.name.empty()) s += " '" + l.name + "'";
  return s + ")";
}

double silu(double v) { return v / (1.0 + std::exp(-v)); }

void apply_act(T4& x, Activation a) {
  for (double& v : x.values()) v = a == Activation::Silu ? silu(v) : std::max(0.0, v);
}

T4 activated(const T4& x, Activation a) {
  T4 y = x;
  apply_act(y, a);
  return y;
}

// Zero-padded "same" convolution; w is [out, in, k, k, k].
T4 conv3d(const T4& x, const T4& w, const T4& b) {
  const std::size_t cin = x.dim(0), nx = x.dim(1), ny = x.dim(2), nz = x.dim(3);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  const long long p = static_cast<long long>(k / 2);
  T4 out({cout, nx, ny, nz});
  for (std::size_t o = 0; o < cout; ++o) {
    double* dst = out.data() + o * nx * ny * nz;
    std::fill(dst, dst + nx * ny * nz, b[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* src = x.data() + c * nx * ny * nz;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t e = 0; e < k; ++e) {
          for (std::size_t f = 0; f < k; ++f) {
            const double wv = w(o, c, a, e, f);
            if (wv == 0.0) continue;
            const long long dx = static_cast<long long>(a) - p;
            const long long dy = static_cast<long long>(e) - p;
            const long long dz = static_cast<long long>(f) - p;
            const std::size_t z0 = static_cast<std::size_t>(std::max<long long>(0, -dz));
            const std::size_t z1 = static_cast<std::size_t>(std::min<long long>(nz, static_cast<long long>(nz) - dz));
            for (std::size_t i = 0; i < nx; ++i) {
              const long long si = static_cast<long long>(i) + dx;
              if (si < 0 || si >= static_cast<long long>(nx)) continue;
              for (std::size_t j = 0; j < ny; ++j) {
                const long long sj = static_cast<long long>(j) + dy;
                if (sj < 0 || sj >= static_cast<long long>(ny)) continue;
                double* drow = dst + (i * ny + j) * nz;
                const double* srow = src + (static_cast<std::size_t>(si) * ny + static_cast<std::size_t>(sj)) * nz;
                for (std::size_t z = z0; z < z1; ++z) {
                  drow[z] += wv * srow[static_cast<std::size_t>(static_cast<long long>(z) + dz)];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

T4 avg_pool_xy(const T4& x) {
  const std::size_t c = x.dim(0), nx = x.dim(1), ny = x.dim(2), nz = x.dim(3);
  if (nx % 2 || ny % 2) throw ValidationError("down requires even x and y extents, got " + shape_to_string(x.shape()));
  T4 out({c, nx / 2, ny / 2, nz});
  for (std::size_t a = 0; a < c; ++a)
    for (std::size_t i = 0; i < nx / 2; ++i)
      for (std::size_t j = 0; j < ny / 2; ++j)
        for (std::size_t z = 0; z < nz; ++z) {
          out(a, i, j, z) = 0.25 * (x(a, 2 * i, 2 * j, z) + x(a, 2 * i + 1, 2 * j, z) + x(a, 2 * i, 2 * j + 1, z) +
                                    x(a, 2 * i + 1, 2 * j + 1, z));
        }
  return out;
}

T4 upsample_xy(const T4& x) {
  const std::size_t c = x.dim(0), nx = x.dim(1), ny = x.dim(2), nz = x.dim(3);
  T4 out({c, 2 * nx, 2 * ny, nz});
  for (std::size_t a = 0; a < c; ++a)
    for (std::size_t i = 0; i < 2 * nx; ++i)
      for (std::size_t j = 0; j < 2 * ny; ++j)
        for (std::size_t z = 0; z < nz; ++z) out(a, i, j, z) = x(a, i / 2, j / 2, z);
  return out;
}

T4 concat(const T4& a, const T4& b) {
  T4 out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
  std::copy(a.values().begin(), a.values().end(), out.data());
  std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
  return out;
}

// y = W v + b for W [out, in].
std::vector<double> linear(const T4& w, const T4* b, const std::vector<double>& v) {
  std::vector<double> y(w.dim(0), 0.0);
  for (std::size_t o = 0; o < w.dim(0); ++o) {
    double s = b ? (*b)[o] : 0.0;
    for (std::size_t i = 0; i < w.dim(1); ++i) s += w(o, i) * v[i];
    y[o] = s;
  }
  return y;
}

std::size_t to_size(std::string_view token, const std::string& where) {
  try {
    const long long v = parse_int(token);
    if (v < 0) throw ParseError("negative value");
    return static_cast<std::size_t>(v);
  } catch (const ParseError&) {
    throw ParseError(where + ": expected a non-negative integer, got '" + std::string(token) + "'");
  }
}

}  // namespace

std::vector<double> timestep_embedding(double t, std::size_t dim) {
  if (dim % 2) throw ValidationError("time embedding width must be even");
  const std::size_t half = dim / 2;
  std::vector<double> emb(dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double f = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    emb[i] = std::sin(t * f);
    emb[half + i] = std::cos(t * f);
  }
  return emb;
}

DenoiserSpec parse_descriptor(std::string_view text) {
  DenoiserSpec spec;
  bool have_magic = false, have_latent = false, have_cond = false;
  std::size_t line_no = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    const std::string where = "descriptor line " + std::to_string(line_no);
    std::string_view line = raw.substr(0, raw.find('#'));
    std::vector<std::string_view> tok;
    for (std::string_view t : split(trim(line), ' ')) {
      if (!trim(t).empty()) tok.push_back(trim(t));
    }
    if (tok.empty()) continue;
    auto need = [&](std::size_t n) {
      if (tok.size() != n) {
        throw ParseError(where + ": '" + std::string(tok[0]) + "' takes " + std::to_string(n - 1) + " arguments");
      }
    };
    if (!have_magic) {
      if (tok.size() != 2 || tok[0] != "denoiser" || tok[1] != "v1") {
        throw ParseError(where + ": expected 'denoiser v1' header");
      }
      have_magic = true;
      continue;
    }
    const std::string_view op = tok[0];
    LayerSpec l;
    if (op == "latent_channels") {
      need(2), spec.latent_channels = to_size(tok[1], where), have_latent = true;
      continue;
    }
    if (op == "condition_channels") {
      need(2), spec.condition_channels = to_size(tok[1], where), have_cond = true;
      continue;
    }
    if (op == "time_embedding") {
      need(2), spec.time_embedding = to_size(tok[1], where);
      continue;
    }
    if (op == "conv3d" || op == "resblock") {
      need(5);
      l.kind = op == "conv3d" ? LayerKind::Conv3d : LayerKind::ResBlock;
      l.name = tok[1];
      l.in = to_size(tok[2], where);
      l.out = to_size(tok[3], where);
      l.kernel = to_size(tok[4], where);
    } else if (op == "act") {
      need(2);
      l.kind = LayerKind::Act;
      if (tok[1] == "silu") l.act = Activation::Silu;
      else if (tok[1] == "relu") l.act = Activation::Relu;
      else throw ParseError(where + ": unknown activation '" + std::string(tok[1]) + "'");
    } else if (op == "film") {
      need(3);
      l.kind = LayerKind::Film;
      l.name = tok[1];
      l.in = l.out = to_size(tok[2], where);
    } else if (op == "xattn") {
      need(4);
      l.kind = LayerKind::CrossAttn;
      l.name = tok[1];
      l.in = l.out = to_size(tok[2], where);
      l.dim = to_size(tok[3], where);
    } else if (op == "down" || op == "up") {
      need(1);
      l.kind = op == "down" ? LayerKind::Down : LayerKind::Up;
    } else if (op == "save" || op == "concat") {
      need(2);
      l.kind = op == "save" ? LayerKind::Save : LayerKind::Concat;
      l.name = tok[1];
    } else {
      throw ParseError(where + ": unknown statement '" + std::string(op) + "'");
    }
    spec.layers.push_back(std::move(l));
  }
  if (!have_magic) throw ParseError("descriptor is empty");
  if (!have_latent || !have_cond) throw ParseError("descriptor must set latent_channels and condition_channels");
  check_spec(spec);
  return spec;
}

std::string to_text(const DenoiserSpec& spec) {
  std::ostringstream out;
  out << "denoiser v1\n"
      << "latent_channels " << spec.latent_channels << "\n"
      << "condition_channels " << spec.condition_channels << "\n"
      << "time_embedding " << spec.time_embedding << "\n";
  for (const LayerSpec& l : spec.layers) {
    out << kind_keyword(l.kind);
    switch (l.kind) {
      case LayerKind::Conv3d:
      case LayerKind::ResBlock:
        out << ' ' << l.name << ' ' << l.in << ' ' << l.out << ' ' << l.kernel;
        break;
      case LayerKind::Act:
        out << ' ' << (l.act == Activation::Silu ? "silu" : "relu");
        break;
      case LayerKind::Film:
        out << ' ' << l.name << ' ' << l.in;
        break;
      case LayerKind::CrossAttn:
        out << ' ' << l.name << ' ' << l.in << ' ' << l.dim;
        break;
      case LayerKind::Save:
      case LayerKind::Concat:
        out << ' ' << l.name;
        break;
      case LayerKind::Down:
      case LayerKind::Up:
        break;
    }
    out << '\n';
  }
  return out.str();
}

void check_spec(const DenoiserSpec& spec) {
  if (spec.latent_channels == 0) throw ValidationError("latent_channels must be positive");
  if (spec.time_embedding % 2) throw ValidationError("time_embedding must be even");
  std::size_t ch = spec.latent_channels + spec.condition_channels;
  int level = 0;
  std::map<std::string, std::pair<std::size_t, int>> slots;
  for (std::size_t n = 0; n < spec.layers.size(); ++n) {
    const LayerSpec& l = spec.layers[n];
    const std::string who = layer_label(spec, n);
    switch (l.kind) {
      case LayerKind::Conv3d:
      case LayerKind::ResBlock:
        if (l.in != ch) {
          throw ValidationError(who + ": expects " + std::to_string(l.in) + " input channels, receives " +
                                std::to_string(ch));
        }
        if (l.out == 0) throw ValidationError(who + ": output channels must be positive");
        if (l.kernel % 2 == 0) throw ValidationError(who + ": kernel size must be odd");
        ch = l.out;
        break;
      case LayerKind::Film:
      case LayerKind::CrossAttn:
        if (l.in != ch) {
          throw ValidationError(who + ": declared for " + std::to_string(l.in) + " channels, receives " +
                                std::to_string(ch));
        }
        if (spec.condition_channels == 0) throw ValidationError(who + ": needs condition channels");
        if (l.kind == LayerKind::CrossAttn && l.dim == 0) throw ValidationError(who + ": attention width must be positive");
        break;
      case LayerKind::Act:
        break;
      case LayerKind::Down:
        ++level;
        break;
      case LayerKind::Up:
        if (level == 0) throw ValidationError(who + ": upsampling above the input resolution");
        --level;
        break;
      case LayerKind::Save:
        if (!slots.emplace(l.name, std::make_pair(ch, level)).second) {
          throw ValidationError(who + ": slot saved twice");
        }
        break;
      case LayerKind::Concat: {
        const auto it = slots.find(l.name);
        if (it == slots.end()) throw ValidationError(who + ": unknown slot");
        if (it->second.second != level) throw ValidationError(who + ": slot was saved at another resolution");
        ch += it->second.first;
        break;
      }
    }
  }
  if (level != 0) throw ValidationError("descriptor ends below the input resolution");
  if (ch != spec.latent_channels) {
    throw ValidationError("descriptor produces " + std::to_string(ch) + " channels, expected " +
                          std::to_string(spec.latent_channels));
  }
}

std::vector<ParamSpec> parameter_list(const DenoiserSpec& spec) {
  std::vector<ParamSpec> out;
  const std::size_t d = spec.time_embedding, cc = spec.condition_channels;
  if (d > 0) {
    out.push_back({"time.fc1.weight", {d, d}, "time"});
    out.push_back({"time.fc1.bias", {d}, "time"});
    out.push_back({"time.fc2.weight", {d, d}, "time"});
    out.push_back({"time.fc2.bias", {d}, "time"});
  }
  for (const LayerSpec& l : spec.layers) {
    const std::size_t k = l.kernel;
    switch (l.kind) {
      case LayerKind::Conv3d:
        out.push_back({l.name + ".weight", {l.out, l.in, k, k, k}, l.name});
        out.push_back({l.name + ".bias", {l.out}, l.name});
        break;
      case LayerKind::ResBlock:
        out.push_back({l.name + ".conv1.weight", {l.out, l.in, k, k, k}, l.name});
        out.push_back({l.name + ".conv1.bias", {l.out}, l.name});
        if (d > 0) {
          out.push_back({l.name + ".temb.weight", {l.out, d}, l.name});
          out.push_back({l.name + ".temb.bias", {l.out}, l.name});
        }
        out.push_back({l.name + ".conv2.weight", {l.out, l.out, k, k, k}, l.name});
        out.push_back({l.name + ".conv2.bias", {l.out}, l.name});
        if (l.in != l.out) {
          out.push_back({l.name + ".skip.weight", {l.out, l.in, 1, 1, 1}, l.name});
          out.push_back({l.name + ".skip.bias", {l.out}, l.name});
        }
        break;
      case LayerKind::Film:
        out.push_back({l.name + ".weight", {2 * l.in, cc, 1, 1, 1}, l.name});
        out.push_back({l.name + ".bias", {2 * l.in}, l.name});
        break;
      case LayerKind::CrossAttn:
        out.push_back({l.name + ".q.weight", {l.dim, l.in}, l.name});
        out.push_back({l.name + ".k.weight", {l.dim, cc}, l.name});
        out.push_back({l.name + ".v.weight", {l.in, cc}, l.name});
        break;
      default:
        break;
    }
  }
  return out;
}

std::vector<Tensor<double>> random_parameters(const DenoiserSpec& spec, std::uint64_t seed, double gain) {
  Rng rng(seed);
  std::vector<Tensor<double>> out;
  for (const ParamSpec& p : parameter_list(spec)) {
    Tensor<double> t(p.shape, 0.0);
    if (p.shape.size() > 1) {
      const std::size_t fan_in = t.size() / p.shape[0];
      const double scale = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
      for (double& v : t.values()) v = scale * rng.normal();
    }
    out.push_back(std::move(t));
  }
  return out;
}

ConvDenoiser::ConvDenoiser(DenoiserSpec spec, std::vector<Tensor<double>> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  check_spec(spec_);
  const std::vector<ParamSpec> expected = parameter_list(spec_);
  for (std::size_t n = 0; n < expected.size(); ++n) {
    const ParamSpec& p = expected[n];
    const std::string who = p.layer == "time" ? std::string("time embedding") : "layer '" + p.layer + "'";
    if (n >= params_.size()) {
      throw ValidationError(who + ": weights missing for " + p.name + " (archive holds " +
                            std::to_string(params_.size()) + " records, descriptor needs " +
                            std::to_string(expected.size()) + ")");
    }
    if (params_[n].shape() != p.shape) {
      throw ValidationError(who + ": parameter " + p.name + " expects shape " + shape_to_string(p.shape) +
                            ", record " + std::to_string(n) + " has " + shape_to_string(params_[n].shape()));
    }
  }
  if (params_.size() != expected.size()) {
    throw ValidationError("weight archive holds " + std::to_string(params_.size() - expected.size()) +
                          " records beyond the last layer");
  }
  std::size_t at = spec_.time_embedding > 0 ? 4 : 0;
  for (const LayerSpec& l : spec_.layers) {
    first_param_.push_back(at);
    switch (l.kind) {
      case LayerKind::Conv3d:
      case LayerKind::Film:
        at += 2;
        break;
      case LayerKind::ResBlock:
        at += 4 + (spec_.time_embedding > 0 ? 2 : 0) + (l.in != l.out ? 2 : 0);
        break;
      case LayerKind::CrossAttn:
        at += 3;
        break;
      default:
        break;
    }
  }
}

Tensor<double> ConvDenoiser::forward(const Tensor<double>& x_t, double t, const Tensor<double>& cond) const {
  if (x_t.rank() != 4 || x_t.dim(0) != spec_.latent_channels) {
    throw ValidationError("denoiser input must have shape [" + std::to_string(spec_.latent_channels) + ", X, Y, Z]");
  }
  if (cond.rank() != 4 || cond.dim(0) != spec_.condition_channels || cond.dim(1) != x_t.dim(1) ||
      cond.dim(2) != x_t.dim(2) || cond.dim(3) != x_t.dim(3)) {
    throw ValidationError("condition must have shape [" + std::to_string(spec_.condition_channels) +
                          ", X, Y, Z] matching the latent");
  }

  std::vector<double> temb;
  if (spec_.time_embedding > 0) {
    std::vector<double> h = linear(params_[0], &params_[1], timestep_embedding(t, spec_.time_embedding));
    for (double& v : h) v = silu(v);
    temb = linear(params_[2], &params_[3], h);
    for (double& v : temb) v = silu(v);  // every consumer applies silu first
  }

  std::vector<T4> cond_levels{cond};
  auto cond_at = [&](std::size_t level) -> const T4& {
    while (cond_levels.size() <= level) cond_levels.push_back(avg_pool_xy(cond_levels.back()));
    return cond_levels[level];
  };

  T4 x = concat(x_t, cond);
  std::size_t level = 0;
  std::map<std::string, T4> slots;
  for (std::size_t n = 0; n < spec_.layers.size(); ++n) {
    const LayerSpec& l = spec_.layers[n];
    const T4* p = params_.data() + first_param_[n];
    switch (l.kind) {
      case LayerKind::Conv3d:
        x = conv3d(x, p[0], p[1]);
        break;
      case LayerKind::Act:
        apply_act(x, l.act);
        break;
      case LayerKind::ResBlock: {
        std::size_t q = 0;
        T4 h = conv3d(activated(x, Activation::Silu), p[q], p[q + 1]);
        q += 2;
        if (!temb.empty()) {
          const std::vector<double> shift = linear(p[q], &p[q + 1], temb);
          q += 2;
          const std::size_t vox = h.size() / h.dim(0);
          for (std::size_t c = 0; c < h.dim(0); ++c) {
            for (std::size_t v = 0; v < vox; ++v) h[c * vox + v] += shift[c];
          }
        }
        apply_act(h, Activation::Silu);
        h = conv3d(h, p[q], p[q + 1]);
        q += 2;
        const T4 skip = l.in != l.out ? conv3d(x, p[q], p[q + 1]) : x;
        for (std::size_t v = 0; v < h.size(); ++v) h[v] += skip[v];
        x = std::move(h);
        break;
      }
      case LayerKind::Film: {
        const T4 gb = conv3d(cond_at(level), p[0], p[1]);
        const std::size_t c = l.in, vox = x.size() / c;
        for (std::size_t a = 0; a < c; ++a) {
          for (std::size_t v = 0; v < vox; ++v) {
            x[a * vox + v] = x[a * vox + v] * (1.0 + gb[a * vox + v]) + gb[(c + a) * vox + v];
          }
        }
        break;
      }
      case LayerKind::CrossAttn: {
        const T4& cl = cond_at(level);
        const std::size_t c = l.in, cc = spec_.condition_channels, dim = l.dim;
        const std::size_t vox = x.size() / c;
        const T4& wq = p[0];
        const T4& wk = p[1];
        const T4& wv = p[2];
        // Keys and values for every condition voxel.
        std::vector<double> keys(vox * dim, 0.0), vals(vox * c, 0.0);
        for (std::size_t m = 0; m < vox; ++m) {
          for (std::size_t d = 0; d < dim; ++d) {
            double s = 0.0;
            for (std::size_t a = 0; a < cc; ++a) s += wk(d, a) * cl[a * vox + m];
            keys[m * dim + d] = s;
          }
          for (std::size_t o = 0; o < c; ++o) {
            double s = 0.0;
            for (std::size_t a = 0; a < cc; ++a) s += wv(o, a) * cl[a * vox + m];
            vals[m * c + o] = s;
          }
        }
        const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
        T4 y = x;
        std::vector<double> q(dim), score(vox);
        for (std::size_t v = 0; v < vox; ++v) {
          for (std::size_t d = 0; d < dim; ++d) {
            double s = 0.0;
            for (std::size_t a = 0; a < c; ++a) s += wq(d, a) * x[a * vox + v];
            q[d] = s;
          }
          double top = -std::numeric_limits<double>::infinity();
          for (std::size_t m = 0; m < vox; ++m) {
            double s = 0.0;
            for (std::size_t d = 0; d < dim; ++d) s += q[d] * keys[m * dim + d];
            score[m] = s * scale;
            top = std::max(top, score[m]);
          }
          double z = 0.0;
          for (std::size_t m = 0; m < vox; ++m) z += (score[m] = std::exp(score[m] - top));
          for (std::size_t o = 0; o < c; ++o) {
            double s = 0.0;
            for (std::size_t m = 0; m < vox; ++m) s += score[m] * vals[m * c + o];
            y[o * vox + v] += s / z;
          }
        }
        x = std::move(y);
        break;
      }
      case LayerKind::Down:
        x = avg_pool_xy(x);
        ++level;
        break;
      case LayerKind::Up:
        x = upsample_xy(x);
        --level;
        break;
      case LayerKind::Save:
        slots[l.name] = x;
        break;
      case LayerKind::Concat:
        x = concat(x, slots.at(l.name));
        break;
    }
  }
  return x;
}

Tensor<double> ConvDenoiser::predict_noise(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& cond,
                                           const NoiseSchedule& sched) const {
  if (t == 0 || t > sched.steps()) throw ValidationError("timestep outside the schedule");
  return forward(x_t, static_cast<double>(t), cond);
}

std::size_t ConvDenoiser::workspace_elements(std::size_t voxels) const {
  // Live set at each layer: current activation, its successor, saved slots
  // and the pooled condition pyramid.
  std::size_t ch = spec_.latent_channels + spec_.condition_channels;
  std::size_t level = 0, saved = 0, peak = 0;
  std::map<std::string, std::size_t> slot_channels;
  auto at_level = [&](std::size_t c, std::size_t lv) { return c * (voxels >> (2 * lv)); };
  const std::size_t cond = 2 * spec_.condition_channels * voxels;
  for (const LayerSpec& l : spec_.layers) {
    std::size_t next = ch;
    switch (l.kind) {
      case LayerKind::Conv3d:
      case LayerKind::ResBlock:
        next = l.out;
        break;
      case LayerKind::Save:
        slot_channels[l.name] = ch;
        saved += at_level(ch, level);
        break;
      case LayerKind::Concat:
        next = ch + slot_channels.at(l.name);
        break;
      case LayerKind::Down:
        ++level;
        break;
      case LayerKind::Up:
        --level;
        break;
      default:
        break;
    }
    const std::size_t extra = l.kind == LayerKind::ResBlock ? 2 * at_level(next, level) : at_level(next, level);
    peak = std::max(peak, at_level(ch, level) + extra + saved + cond);
    ch = next;
  }
  return peak;
}

std::unique_ptr<ConvDenoiser> load_denoiser(const std::filesystem::path& spec_file,
                                            const std::filesystem::path& weights_file) {
  std::ifstream in(spec_file, std::ios::binary);
  if (!in) throw IoError("cannot open " + spec_file.string());
  std::ostringstream text;
  text << in.rdbuf();
  DenoiserSpec spec;
  try {
    spec = parse_descriptor(text.str());
  } catch (const Error& e) {
    throw ParseError(spec_file.string() + ": " + e.what());
  }
  std::vector<Tensor<double>> params;
  for (const AnyTensor& r : load_records(weights_file)) {
    if (record_type(r) != ElementType::F32 && record_type(r) != ElementType::F64) {
      throw ParseError(weights_file.string() + ": weights must be f32 or f64 records");
    }
    params.push_back(to_f64(r));
  }
  return std::make_unique<ConvDenoiser>(std::move(spec), std::move(params));
}

ParityVector load_parity(const std::filesystem::path& path) {
  const std::vector<AnyTensor> records = load_records(path);
  if (records.size() != 4) {
    throw ParseError(path.string() + ": parity file needs 4 records, found " + std::to_string(records.size()));
  }
  ParityVector p;
  p.x_t = to_f64(records[0]);
  const Tensor<double> t = to_f64(records[1]);
  if (t.size() != 1) throw ParseError(path.string() + ": time record must hold one value");
  p.t = t[0];
  p.cond = to_f64(records[2]);
  p.expected = to_f64(records[3]);
  if (p.expected.shape() != p.x_t.shape()) throw ParseError(path.string() + ": output shape differs from input");
  return p;
}

void save_parity(const std::filesystem::path& path, const ParityVector& parity) {
  save_records(path, {parity.x_t, Tensor<double>({1}, parity.t), parity.cond, parity.expected});
}

double parity_error(const ConvDenoiser& net, const ParityVector& parity) {
  const Tensor<double> out = net.forward(parity.x_t, parity.t, parity.cond);
  double worst = 0.0;
  for (std::size_t n = 0; n < out.size(); ++n) worst = std::max(worst, std::abs(out[n] - parity.expected[n]));
  return worst;
}

}  // namespace rm3d::diffusion
