#include "oodlab/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "oodlab/rng.hpp"

namespace oodlab {

// ---------------------------------------------------------------------------
// Configuration and parameter containers
// ---------------------------------------------------------------------------

void AEConfig::validate() const {
  if (channels.empty() || channels[0] != 1) {
    throw DataError("AEConfig: channels must start with 1 input plane");
  }
  for (int c : channels) {
    if (c < 1) throw DataError("AEConfig: channel counts must be positive");
  }
  if (kernel != 3) throw DataError("AEConfig: only 3x3 kernels are supported");
  if (pool != 2) throw DataError("AEConfig: only 2x2 pooling is supported");
  if (latent_dim < 1) throw DataError("AEConfig: latent_dim must be >= 1");
  if (input_h < 1 || input_w < 1) throw DataError("AEConfig: bad input size");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw DataError("AEConfig: leaky_slope must be in [0, 1)");
  }
  const int div = 1 << stages();
  if (input_h % div != 0 || input_w % div != 0) {
    throw DataError("AEConfig: input size must be divisible by 2^stages = " + std::to_string(div));
  }
  if (feature_h() < 1 || feature_w() < 1) {
    throw DataError("AEConfig: input collapses to nothing after pooling");
  }
}

AEConfig AEConfig::full_scale() {
  AEConfig cfg;
  cfg.input_h = 64;
  cfg.input_w = 1024;
  cfg.channels = {1, 16, 32, 64, 128};
  cfg.latent_dim = 512;
  return cfg;
}

AEParams AEParams::zeros(const AEConfig& cfg) {
  cfg.validate();
  AEParams p;
  p.config = cfg;
  const int s = cfg.stages();
  for (int i = 0; i < s; ++i) {
    ConvLayer c;
    c.in_ch = cfg.channels[i];
    c.out_ch = cfg.channels[i + 1];
    c.w.assign(static_cast<std::size_t>(c.out_ch) * c.in_ch * 9, 0.0);
    c.b.assign(static_cast<std::size_t>(c.out_ch), 0.0);
    p.enc_convs.push_back(std::move(c));
  }
  p.enc_fc.in_dim = cfg.flat_dim();
  p.enc_fc.out_dim = cfg.latent_dim;
  p.enc_fc.w.assign(static_cast<std::size_t>(cfg.latent_dim) * cfg.flat_dim(), 0.0);
  p.enc_fc.b.assign(static_cast<std::size_t>(cfg.latent_dim), 0.0);
  p.dec_fc.in_dim = cfg.latent_dim;
  p.dec_fc.out_dim = cfg.flat_dim();
  p.dec_fc.w.assign(static_cast<std::size_t>(cfg.flat_dim()) * cfg.latent_dim, 0.0);
  p.dec_fc.b.assign(static_cast<std::size_t>(cfg.flat_dim()), 0.0);
  for (int i = s - 1; i >= 0; --i) {
    ConvLayer c;
    c.in_ch = cfg.channels[i + 1];
    c.out_ch = cfg.channels[i];
    c.w.assign(static_cast<std::size_t>(c.out_ch) * c.in_ch * 9, 0.0);
    c.b.assign(static_cast<std::size_t>(c.out_ch), 0.0);
    p.dec_tconvs.push_back(std::move(c));
  }
  return p;
}

std::vector<std::vector<double>*> AEParams::tensors() {
  std::vector<std::vector<double>*> t;
  for (ConvLayer& c : enc_convs) {
    t.push_back(&c.w);
    t.push_back(&c.b);
  }
  t.push_back(&enc_fc.w);
  t.push_back(&enc_fc.b);
  t.push_back(&dec_fc.w);
  t.push_back(&dec_fc.b);
  for (ConvLayer& c : dec_tconvs) {
    t.push_back(&c.w);
    t.push_back(&c.b);
  }
  return t;
}

std::vector<const std::vector<double>*> AEParams::tensors() const {
  std::vector<const std::vector<double>*> t;
  for (const auto* v : const_cast<AEParams*>(this)->tensors()) t.push_back(v);
  return t;
}

std::size_t AEParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* v : tensors()) n += v->size();
  return n;
}

AEParams init_autoencoder(const AEConfig& cfg) {
  AEParams p = AEParams::zeros(cfg);
  Rng rng(cfg.seed);
  auto fill = [&rng](std::vector<double>& w, int fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : w) v = rng.uniform(-bound, bound);
  };
  // Weights only; biases stay zero. Declaration order fixes the random stream.
  for (ConvLayer& c : p.enc_convs) fill(c.w, c.in_ch * 9);
  fill(p.enc_fc.w, p.enc_fc.in_dim);
  fill(p.dec_fc.w, p.dec_fc.in_dim);
  for (ConvLayer& c : p.dec_tconvs) fill(c.w, c.in_ch * 9);
  return p;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

namespace {

struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;
  Tensor3() = default;
  Tensor3(int c_, int h_, int w_)
      : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}
  double& at(int ci, int hi, int wi) {
    return v[(static_cast<std::size_t>(ci) * h + hi) * w + wi];
  }
  double at(int ci, int hi, int wi) const {
    return v[(static_cast<std::size_t>(ci) * h + hi) * w + wi];
  }
};

inline std::size_t widx(int o, int c, int dy, int dx, int in_ch) {
  return ((static_cast<std::size_t>(o) * in_ch + c) * 3 + dy) * 3 + dx;
}

// 3x3 convolution with zero padding 1; output keeps the spatial size.
Tensor3 conv_forward(const ConvLayer& l, const Tensor3& x) {
  Tensor3 z(l.out_ch, x.h, x.w);
  for (int o = 0; o < l.out_ch; ++o) {
    for (int y = 0; y < x.h; ++y) {
      for (int c = 0; c < l.in_ch; ++c) {
        for (int dy = 0; dy < 3; ++dy) {
          const int sy = y + dy - 1;
          if (sy < 0 || sy >= x.h) continue;
          for (int dx = 0; dx < 3; ++dx) {
            const double wv = l.w[widx(o, c, dy, dx, l.in_ch)];
            const int x0 = std::max(0, 1 - dx);
            const int x1 = std::min(x.w, x.w + 1 - dx);
            for (int xx = x0; xx < x1; ++xx) {
              z.at(o, y, xx) += wv * x.at(c, sy, xx + dx - 1);
            }
          }
        }
      }
      for (int xx = 0; xx < x.w; ++xx) z.at(o, y, xx) += l.b[o];
    }
  }
  return z;
}

// Transposed 3x3 convolution, stride 2, producing exactly doubled dimensions:
// input cell (iy, ix) scatters into output rows 2*iy-1 .. 2*iy+1.
Tensor3 tconv_forward(const ConvLayer& l, const Tensor3& x) {
  const int oh = x.h * 2, ow = x.w * 2;
  Tensor3 z(l.out_ch, oh, ow);
  for (int o = 0; o < l.out_ch; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) z.at(o, y, xx) = l.b[o];
    }
  }
  for (int c = 0; c < l.in_ch; ++c) {
    for (int iy = 0; iy < x.h; ++iy) {
      for (int ix = 0; ix < x.w; ++ix) {
        const double val = x.at(c, iy, ix);
        for (int o = 0; o < l.out_ch; ++o) {
          for (int dy = 0; dy < 3; ++dy) {
            const int oy = 2 * iy + dy - 1;
            if (oy < 0 || oy >= oh) continue;
            for (int dx = 0; dx < 3; ++dx) {
              const int ox = 2 * ix + dx - 1;
              if (ox < 0 || ox >= ow) continue;
              z.at(o, oy, ox) += l.w[widx(o, c, dy, dx, l.in_ch)] * val;
            }
          }
        }
      }
    }
  }
  return z;
}

// 2x2 max-pool, stride 2; ties go to the first cell in row-major order.
Tensor3 maxpool_forward(const Tensor3& a, std::vector<int>& argmax) {
  Tensor3 p(a.c, a.h / 2, a.w / 2);
  argmax.assign(p.v.size(), -1);
  std::size_t out_i = 0;
  for (int c = 0; c < a.c; ++c) {
    for (int oy = 0; oy < p.h; ++oy) {
      for (int ox = 0; ox < p.w; ++ox, ++out_i) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = -1;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int iy = 2 * oy + dy, ix = 2 * ox + dx;
            const double v = a.at(c, iy, ix);
            if (v > best) {  // strict: earlier row-major cell wins ties
              best = v;
              best_idx = (c * a.h + iy) * a.w + ix;
            }
          }
        }
        p.v[out_i] = best;
        argmax[out_i] = best_idx;
      }
    }
  }
  return p;
}

inline double leaky(double z, double slope) { return z > 0.0 ? z : slope * z; }
inline double leaky_grad(double z, double slope) { return z > 0.0 ? 1.0 : slope; }
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> dense_forward(const DenseLayer& l, const std::vector<double>& x) {
  std::vector<double> y(static_cast<std::size_t>(l.out_dim));
  for (int o = 0; o < l.out_dim; ++o) {
    double acc = l.b[o];
    const double* row = &l.w[static_cast<std::size_t>(o) * l.in_dim];
    for (int i = 0; i < l.in_dim; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
  return y;
}

// Every intermediate needed by the backward pass, for a single image.
struct Trace {
  std::vector<Tensor3> enc_in;               // conv inputs
  std::vector<Tensor3> enc_z;                // conv pre-activations
  std::vector<Tensor3> enc_a;                // leaky outputs (pool inputs)
  std::vector<std::vector<int>> pool_argmax;
  std::vector<double> flat;
  std::vector<double> enc_fc_z, latent;
  std::vector<double> dec_fc_z, dec_fc_a;
  std::vector<Tensor3> dec_in;  // tconv inputs
  std::vector<Tensor3> dec_z;   // tconv pre-activations
  Tensor3 out;
};

Tensor3 image_tensor(const AEConfig& cfg, const GrayImage& img) {
  if (img.height != cfg.input_h || img.width != cfg.input_w) {
    throw DataError("autoencoder: image is " + std::to_string(img.height) + "x" +
                    std::to_string(img.width) + ", config wants " + std::to_string(cfg.input_h) +
                    "x" + std::to_string(cfg.input_w));
  }
  Tensor3 t(1, img.height, img.width);
  t.v = img.pixels;
  return t;
}

void forward_one(const AEParams& p, const GrayImage& img, Trace& tr) {
  const AEConfig& cfg = p.config;
  const int s = cfg.stages();
  const double slope = cfg.leaky_slope;

  Tensor3 x = image_tensor(cfg, img);
  tr.enc_in.clear();
  tr.enc_z.clear();
  tr.enc_a.clear();
  tr.pool_argmax.assign(static_cast<std::size_t>(s), {});
  for (int i = 0; i < s; ++i) {
    tr.enc_in.push_back(x);
    Tensor3 z = conv_forward(p.enc_convs[i], x);
    Tensor3 a = z;
    for (double& v : a.v) v = leaky(v, slope);
    x = maxpool_forward(a, tr.pool_argmax[i]);
    tr.enc_z.push_back(std::move(z));
    tr.enc_a.push_back(std::move(a));
  }
  tr.flat = x.v;

  tr.enc_fc_z = dense_forward(p.enc_fc, tr.flat);
  tr.latent = tr.enc_fc_z;
  for (double& v : tr.latent) v = leaky(v, slope);

  tr.dec_fc_z = dense_forward(p.dec_fc, tr.latent);
  if (s == 0) {
    // Degenerate stage-free config: the expansion layer is the output layer.
    tr.out = Tensor3(1, cfg.input_h, cfg.input_w);
    for (std::size_t i = 0; i < tr.dec_fc_z.size(); ++i) tr.out.v[i] = sigmoid(tr.dec_fc_z[i]);
    tr.dec_fc_a.clear();
    tr.dec_in.clear();
    tr.dec_z.clear();
    return;
  }
  tr.dec_fc_a = tr.dec_fc_z;
  for (double& v : tr.dec_fc_a) v = leaky(v, slope);

  Tensor3 y(cfg.channels.back(), cfg.feature_h(), cfg.feature_w());
  y.v = tr.dec_fc_a;
  tr.dec_in.clear();
  tr.dec_z.clear();
  for (int i = 0; i < s; ++i) {
    tr.dec_in.push_back(y);
    Tensor3 z = tconv_forward(p.dec_tconvs[i], y);
    if (i == s - 1) {
      tr.out = z;
      for (double& v : tr.out.v) v = sigmoid(v);
    } else {
      y = z;
      for (double& v : y.v) v = leaky(v, slope);
    }
    tr.dec_z.push_back(std::move(z));
  }
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

void conv_backward(const ConvLayer& l, const Tensor3& x, const Tensor3& dz, ConvLayer& grad,
                   Tensor3& dx) {
  for (int o = 0; o < l.out_ch; ++o) {
    double db = 0.0;
    for (int y = 0; y < x.h; ++y) {
      for (int xx = 0; xx < x.w; ++xx) db += dz.at(o, y, xx);
    }
    grad.b[o] += db;
  }
  dx = Tensor3(l.in_ch, x.h, x.w);
  for (int o = 0; o < l.out_ch; ++o) {
    for (int c = 0; c < l.in_ch; ++c) {
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx_k = 0; dx_k < 3; ++dx_k) {
          const double wv = l.w[widx(o, c, dy, dx_k, l.in_ch)];
          double dw = 0.0;
          for (int y = 0; y < x.h; ++y) {
            const int sy = y + dy - 1;
            if (sy < 0 || sy >= x.h) continue;
            const int x0 = std::max(0, 1 - dx_k);
            const int x1 = std::min(x.w, x.w + 1 - dx_k);
            for (int xx = x0; xx < x1; ++xx) {
              const double g = dz.at(o, y, xx);
              dw += g * x.at(c, sy, xx + dx_k - 1);
              dx.at(c, sy, xx + dx_k - 1) += g * wv;
            }
          }
          grad.w[widx(o, c, dy, dx_k, l.in_ch)] += dw;
        }
      }
    }
  }
}

void tconv_backward(const ConvLayer& l, const Tensor3& x, const Tensor3& dz, ConvLayer& grad,
                    Tensor3& dx) {
  const int oh = dz.h, ow = dz.w;
  for (int o = 0; o < l.out_ch; ++o) {
    double db = 0.0;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) db += dz.at(o, y, xx);
    }
    grad.b[o] += db;
  }
  dx = Tensor3(l.in_ch, x.h, x.w);
  for (int c = 0; c < l.in_ch; ++c) {
    for (int iy = 0; iy < x.h; ++iy) {
      for (int ix = 0; ix < x.w; ++ix) {
        const double val = x.at(c, iy, ix);
        double acc = 0.0;
        for (int o = 0; o < l.out_ch; ++o) {
          for (int dy = 0; dy < 3; ++dy) {
            const int oy = 2 * iy + dy - 1;
            if (oy < 0 || oy >= oh) continue;
            for (int dx_k = 0; dx_k < 3; ++dx_k) {
              const int ox = 2 * ix + dx_k - 1;
              if (ox < 0 || ox >= ow) continue;
              const double g = dz.at(o, oy, ox);
              grad.w[widx(o, c, dy, dx_k, l.in_ch)] += g * val;
              acc += g * l.w[widx(o, c, dy, dx_k, l.in_ch)];
            }
          }
        }
        dx.at(c, iy, ix) = acc;
      }
    }
  }
}

void dense_backward(const DenseLayer& l, const std::vector<double>& x,
                    const std::vector<double>& dy, DenseLayer& grad, std::vector<double>& dx) {
  dx.assign(static_cast<std::size_t>(l.in_dim), 0.0);
  for (int o = 0; o < l.out_dim; ++o) {
    const double g = dy[o];
    grad.b[o] += g;
    double* grow = &grad.w[static_cast<std::size_t>(o) * l.in_dim];
    const double* wrow = &l.w[static_cast<std::size_t>(o) * l.in_dim];
    for (int i = 0; i < l.in_dim; ++i) {
      grow[i] += g * x[i];
      dx[i] += g * wrow[i];
    }
  }
}

// Accumulates the gradient of the per-image mean-pixel MSE into `grads`.
double backward_one(const AEParams& p, const GrayImage& img, AEParams& grads) {
  const AEConfig& cfg = p.config;
  const int s = cfg.stages();
  const double slope = cfg.leaky_slope;

  Trace tr;
  forward_one(p, img, tr);

  const std::size_t npix = tr.out.v.size();
  double loss = 0.0;
  std::vector<double> d_out(npix);
  for (std::size_t i = 0; i < npix; ++i) {
    const double diff = tr.out.v[i] - img.pixels[i];
    loss += diff * diff;
    d_out[i] = 2.0 * diff / static_cast<double>(npix);
  }
  loss /= static_cast<double>(npix);

  std::vector<double> d_dec_fc_z;
  if (s == 0) {
    d_dec_fc_z.resize(npix);
    for (std::size_t i = 0; i < npix; ++i) {
      const double y = tr.out.v[i];
      d_dec_fc_z[i] = d_out[i] * y * (1.0 - y);
    }
  } else {
    // Sigmoid on the final transposed convolution.
    Tensor3 dz = tr.dec_z.back();
    for (std::size_t i = 0; i < dz.v.size(); ++i) {
      const double y = tr.out.v[i];
      dz.v[i] = d_out[i] * y * (1.0 - y);
    }
    // Walk the decoder stages backwards.
    for (int i = s - 1; i >= 0; --i) {
      Tensor3 dx;
      tconv_backward(p.dec_tconvs[i], tr.dec_in[i], dz, grads.dec_tconvs[i], dx);
      if (i > 0) {
        dz = std::move(dx);
        for (std::size_t k = 0; k < dz.v.size(); ++k) {
          dz.v[k] *= leaky_grad(tr.dec_z[i - 1].v[k], slope);
        }
      } else {
        d_dec_fc_z.resize(dx.v.size());
        for (std::size_t k = 0; k < dx.v.size(); ++k) {
          d_dec_fc_z[k] = dx.v[k] * leaky_grad(tr.dec_fc_z[k], slope);
        }
      }
    }
  }

  std::vector<double> d_latent;
  dense_backward(p.dec_fc, tr.latent, d_dec_fc_z, grads.dec_fc, d_latent);

  std::vector<double> d_enc_fc_z(d_latent.size());
  for (std::size_t i = 0; i < d_latent.size(); ++i) {
    d_enc_fc_z[i] = d_latent[i] * leaky_grad(tr.enc_fc_z[i], slope);
  }
  std::vector<double> d_flat;
  dense_backward(p.enc_fc, tr.flat, d_enc_fc_z, grads.enc_fc, d_flat);

  if (s > 0) {
    // Route the flat gradient back through pools, activations and convolutions.
    Tensor3 d_pool(cfg.channels.back(), cfg.feature_h(), cfg.feature_w());
    d_pool.v = d_flat;
    for (int i = s - 1; i >= 0; --i) {
      Tensor3 d_act(tr.enc_a[i].c, tr.enc_a[i].h, tr.enc_a[i].w);
      for (std::size_t k = 0; k < d_pool.v.size(); ++k) {
        d_act.v[static_cast<std::size_t>(tr.pool_argmax[i][k])] += d_pool.v[k];
      }
      for (std::size_t k = 0; k < d_act.v.size(); ++k) {
        d_act.v[k] *= leaky_grad(tr.enc_z[i].v[k], slope);
      }
      Tensor3 dx;
      conv_backward(p.enc_convs[i], tr.enc_in[i], d_act, grads.enc_convs[i], dx);
      d_pool = std::move(dx);
    }
  }
  return loss;
}

}  // namespace

std::vector<GrayImage> ae_forward(const AEParams& params, const std::vector<GrayImage>& batch) {
  params.config.validate();
  std::vector<GrayImage> out;
  out.reserve(batch.size());
  for (const GrayImage& img : batch) {
    Trace tr;
    forward_one(params, img, tr);
    GrayImage rec;
    rec.height = params.config.input_h;
    rec.width = params.config.input_w;
    rec.pixels = std::move(tr.out.v);
    out.push_back(std::move(rec));
  }
  return out;
}

double ae_loss(const GrayImage& recon, const GrayImage& input) {
  if (!recon.same_shape(input)) throw DataError("ae_loss: image shapes differ");
  if (recon.pixels.empty()) throw DataError("ae_loss: empty image");
  double s = 0.0;
  for (std::size_t i = 0; i < recon.pixels.size(); ++i) {
    const double d = recon.pixels[i] - input.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(recon.pixels.size());
}

double ae_loss(const AEParams& params, const std::vector<GrayImage>& batch) {
  if (batch.empty()) throw DataError("ae_loss: empty batch");
  params.config.validate();
  double total = 0.0;
  for (const GrayImage& img : batch) {
    Trace tr;
    forward_one(params, img, tr);
    double s = 0.0;
    for (std::size_t i = 0; i < tr.out.v.size(); ++i) {
      const double d = tr.out.v[i] - img.pixels[i];
      s += d * d;
    }
    total += s / static_cast<double>(tr.out.v.size());
  }
  return total / static_cast<double>(batch.size());
}

BackwardResult ae_backward(const AEParams& params, const std::vector<GrayImage>& batch) {
  if (batch.empty()) throw DataError("ae_backward: empty batch");
  params.config.validate();
  BackwardResult res;
  res.grads = AEParams::zeros(params.config);
  for (const GrayImage& img : batch) {
    res.loss += backward_one(params, img, res.grads);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  res.loss *= inv;
  for (auto* t : res.grads.tensors()) {
    for (double& v : *t) v *= inv;
  }
  return res;
}

AdamState AdamState::create(const AEConfig& cfg, AdamConfig hp) {
  AdamState st;
  st.hp = hp;
  st.m = AEParams::zeros(cfg);
  st.v = AEParams::zeros(cfg);
  return st;
}

void adam_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, long long t, const AdamConfig& hp) {
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
  }
}

void adam_step(AEParams& params, const AEParams& grads, AdamState& state) {
  auto pt = params.tensors();
  auto gt = grads.tensors();
  auto mt = state.m.tensors();
  auto vt = state.v.tensors();
  if (pt.size() != gt.size()) throw DataError("adam_step: gradient shape mismatch");
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (gt[k]->size() != pt[k]->size()) throw DataError("adam_step: gradient shape mismatch");
    for (double g : *gt[k]) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in tensor " + std::to_string(k) +
                           " at step " + std::to_string(state.step + 1));
      }
    }
  }
  ++state.step;
  for (std::size_t k = 0; k < pt.size(); ++k) {
    adam_update(*pt[k], *gt[k], *mt[k], *vt[k], state.step, state.hp);
  }
}

TrainResult train_autoencoder(const AEConfig& cfg, const std::vector<GrayImage>& train,
                              const std::vector<GrayImage>& val, const TrainOptions& opt) {
  cfg.validate();
  if (train.empty()) throw DataError("train_autoencoder: empty training set");
  if (val.empty()) throw DataError("train_autoencoder: empty validation set");
  if (opt.epochs < 0) throw DataError("train_autoencoder: negative epoch count");
  if (opt.batch_size < 1) throw DataError("train_autoencoder: batch_size must be >= 1");

  AEParams params = init_autoencoder(cfg);
  AdamState adam = AdamState::create(cfg);
  // Shuffling draws from its own stream so init and shuffle orders are
  // independently reproducible.
  Rng shuffle_rng(mix_seed(cfg.seed, 0x73687566));

  TrainResult result;
  result.params = params;
  result.best_val_mse = visual_divergence(params, val);
  result.best_epoch = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(opt.batch_size)) {
      std::vector<GrayImage> batch;
      for (std::size_t i = at; i < std::min(order.size(), at + opt.batch_size); ++i) {
        batch.push_back(train[order[i]]);
      }
      BackwardResult bw = ae_backward(params, batch);
      if (!std::isfinite(bw.loss)) {
        throw NumericError("train_autoencoder: loss diverged at epoch " + std::to_string(epoch));
      }
      adam_step(params, bw.grads, adam);
    }
    const double val_mse = visual_divergence(params, val);
    if (!std::isfinite(val_mse)) {
      throw NumericError("train_autoencoder: validation loss diverged at epoch " +
                         std::to_string(epoch));
    }
    result.val_history.push_back(val_mse);
    if (val_mse < result.best_val_mse) {
      result.best_val_mse = val_mse;
      result.best_epoch = epoch;
      result.params = params;
    }
  }
  return result;
}

double visual_divergence(const AEParams& params, const std::vector<GrayImage>& images) {
  if (images.empty()) throw DataError("visual_divergence: no images");
  double total = 0.0;
  for (const GrayImage& img : images) {
    total += ae_loss(params, std::vector<GrayImage>{img});
  }
  return total / static_cast<double>(images.size());
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'O', 'O', 'D', 'A', 'E', 'P', '0', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw DataError(path + ": truncated parameter file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  const std::uint64_t lo = get_u32(in, path);
  const std::uint64_t hi = get_u32(in, path);
  return lo | (hi << 32);
}

float get_f32(std::istream& in, const std::string& path) {
  const std::uint32_t v = get_u32(in, path);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

double get_f64(std::istream& in, const std::string& path) {
  const std::uint64_t v = get_u64(in, path);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void save_ae_params(const AEParams& params, const std::filesystem::path& path) {
  params.config.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(kMagic, sizeof(kMagic));
  const AEConfig& cfg = params.config;
  put_u32(out, static_cast<std::uint32_t>(cfg.input_h));
  put_u32(out, static_cast<std::uint32_t>(cfg.input_w));
  put_u32(out, static_cast<std::uint32_t>(cfg.channels.size()));
  for (int c : cfg.channels) put_u32(out, static_cast<std::uint32_t>(c));
  put_u32(out, static_cast<std::uint32_t>(cfg.kernel));
  put_u32(out, static_cast<std::uint32_t>(cfg.pool));
  put_u32(out, static_cast<std::uint32_t>(cfg.latent_dim));
  put_f64(out, cfg.leaky_slope);
  put_u64(out, cfg.seed);
  for (const auto* t : params.tensors()) {
    for (double v : *t) put_f32(out, static_cast<float>(v));
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

AEParams load_ae_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError(path.string() + ": not an autoencoder parameter file (bad magic)");
  }
  const std::string ps = path.string();
  AEConfig cfg;
  cfg.input_h = static_cast<int>(get_u32(in, ps));
  cfg.input_w = static_cast<int>(get_u32(in, ps));
  const std::uint32_t nch = get_u32(in, ps);
  if (nch < 1 || nch > 16) throw DataError(ps + ": implausible channel count");
  cfg.channels.clear();
  for (std::uint32_t i = 0; i < nch; ++i) cfg.channels.push_back(static_cast<int>(get_u32(in, ps)));
  cfg.kernel = static_cast<int>(get_u32(in, ps));
  cfg.pool = static_cast<int>(get_u32(in, ps));
  cfg.latent_dim = static_cast<int>(get_u32(in, ps));
  cfg.leaky_slope = get_f64(in, ps);
  cfg.seed = get_u64(in, ps);
  cfg.validate();

  AEParams params = AEParams::zeros(cfg);
  for (auto* t : params.tensors()) {
    for (double& v : *t) v = static_cast<double>(get_f32(in, ps));
  }
  in.peek();
  if (!in.eof()) throw DataError(ps + ": trailing bytes after parameter payload");
  return params;
}

}  // namespace oodlab
