#include "cyclone/nn/layers.hpp"

#include <cmath>

#include "cyclone/autodiff/ops.hpp"
#include "cyclone/error.hpp"

namespace cyclone::nn {

using ad::Var;

Linear Linear::create(ad::ParamStore& store, const std::string& name, const std::string& group,
                      std::size_t in, std::size_t out, double init_std, Rng& rng) {
  Linear l;
  l.weight = &store.add(name + ".w", group, ad::normal_tensor({in, out}, init_std, rng));
  l.bias = &store.add(name + ".b", group, ad::Tensor({out}));
  return l;
}

Linear Linear::bind(ad::ParamStore& store, const std::string& name) {
  return {&store.at(name + ".w"), &store.at(name + ".b")};
}

Var Linear::operator()(ad::Graph& g, Var x) const {
  return ad::add_bias(ad::matmul(x, g.param(*weight)), g.param(*bias));
}

LayerNorm LayerNorm::create(ad::ParamStore& store, const std::string& name,
                            const std::string& group, std::size_t dim) {
  return {&store.add(name + ".gamma", group, ad::Tensor({dim}, 1.0)),
          &store.add(name + ".beta", group, ad::Tensor({dim}))};
}

LayerNorm LayerNorm::bind(ad::ParamStore& store, const std::string& name) {
  return {&store.at(name + ".gamma"), &store.at(name + ".beta")};
}

Var LayerNorm::operator()(ad::Graph& g, Var x) const {
  return ad::layer_norm(x, g.param(*gamma), g.param(*beta));
}

TransformerBlock TransformerBlock::create(ad::ParamStore& store, const std::string& name,
                                          const std::string& group, std::size_t dim,
                                          std::size_t heads, std::size_t mlp_dim, double init_std,
                                          Rng& rng) {
  require(heads > 0 && dim % heads == 0, Errc::contract,
          [&] { return "model dim " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) +
              " heads"; });
  TransformerBlock b;
  b.norm1 = LayerNorm::create(store, name + ".norm1", group, dim);
  b.qkv = Linear::create(store, name + ".qkv", group, dim, 3 * dim, init_std, rng);
  b.proj = Linear::create(store, name + ".proj", group, dim, dim, init_std, rng);
  b.norm2 = LayerNorm::create(store, name + ".norm2", group, dim);
  b.fc1 = Linear::create(store, name + ".fc1", group, dim, mlp_dim, init_std, rng);
  b.fc2 = Linear::create(store, name + ".fc2", group, mlp_dim, dim, init_std, rng);
  b.heads = heads;
  return b;
}

TransformerBlock TransformerBlock::bind(ad::ParamStore& store, const std::string& name,
                                        std::size_t heads) {
  return {LayerNorm::bind(store, name + ".norm1"), Linear::bind(store, name + ".qkv"),
          Linear::bind(store, name + ".proj"),     LayerNorm::bind(store, name + ".norm2"),
          Linear::bind(store, name + ".fc1"),      Linear::bind(store, name + ".fc2"),
          heads};
}

Var multi_head_attention(Var qkv, std::size_t heads) {
  const std::size_t d = qkv.shape()[1] / 3;
  require(qkv.shape()[1] == 3 * d && d % heads == 0, Errc::contract,
          "attention input width must be 3 x heads x head_dim");
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(double(dh));
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var q = ad::slice(qkv, 1, h * dh, dh);
    Var k = ad::slice(qkv, 1, d + h * dh, dh);
    Var v = ad::slice(qkv, 1, 2 * d + h * dh, dh);
    Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt);
    outs.push_back(ad::matmul(ad::softmax(scores), v));
  }
  return heads == 1 ? outs[0] : ad::concat(outs, 1);
}

Var TransformerBlock::operator()(ad::Graph& g, Var x) const {
  Var attn = proj(g, multi_head_attention(qkv(g, norm1(g, x)), heads));
  x = ad::add(x, attn);
  Var mlp = fc2(g, ad::gelu(fc1(g, norm2(g, x))));
  return ad::add(x, mlp);
}

ad::Tensor sincos_2d(std::size_t rows, std::size_t cols, std::size_t dim) {
  require(dim % 4 == 0, Errc::contract, "sine/cosine embedding width must be divisible by 4");
  const std::size_t quarter = dim / 4;
  ad::Tensor out({rows * cols, dim});
  auto encode = [&](double pos, double* dst) {
    for (std::size_t k = 0; k < quarter; ++k) {
      const double omega = 1.0 / std::pow(10000.0, double(k) / double(quarter));
      dst[k] = std::sin(pos * omega);
      dst[quarter + k] = std::cos(pos * omega);
    }
  };
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double* row = out.values().data() + (r * cols + c) * dim;
      encode(double(r), row);
      encode(double(c), row + dim / 2);
    }
  }
  return out;
}

}  // namespace cyclone::nn
