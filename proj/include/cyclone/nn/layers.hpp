#pragma once

#include <string>
#include <vector>

#include "cyclone/autodiff/graph.hpp"
#include "cyclone/autodiff/params.hpp"
#include "cyclone/rng.hpp"

namespace cyclone::nn {

// Building blocks that own no state beyond pointers into a ParamStore. The
// store must outlive the layer and must not be reallocated (ParamStore keeps
// addresses stable).

struct Linear {
  ad::Parameter* weight = nullptr;  // [in x out]
  ad::Parameter* bias = nullptr;    // [out]

  static Linear create(ad::ParamStore& store, const std::string& name, const std::string& group,
                       std::size_t in, std::size_t out, double init_std, Rng& rng);
  static Linear bind(ad::ParamStore& store, const std::string& name);

  ad::Var operator()(ad::Graph& g, ad::Var x) const;
  std::size_t in() const { return weight->value.dim(0); }
  std::size_t out() const { return weight->value.dim(1); }
};

struct LayerNorm {
  ad::Parameter* gamma = nullptr;
  ad::Parameter* beta = nullptr;

  static LayerNorm create(ad::ParamStore& store, const std::string& name, const std::string& group,
                          std::size_t dim);
  static LayerNorm bind(ad::ParamStore& store, const std::string& name);

  ad::Var operator()(ad::Graph& g, ad::Var x) const;
};

// Pre-LN transformer block: x + MHA(LN(x)), then x + MLP(LN(x)) with GELU.
struct TransformerBlock {
  LayerNorm norm1;
  Linear qkv;   // [d x 3d]
  Linear proj;  // [d x d]
  LayerNorm norm2;
  Linear fc1;
  Linear fc2;
  std::size_t heads = 1;

  static TransformerBlock create(ad::ParamStore& store, const std::string& name,
                                 const std::string& group, std::size_t dim, std::size_t heads,
                                 std::size_t mlp_dim, double init_std, Rng& rng);
  static TransformerBlock bind(ad::ParamStore& store, const std::string& name, std::size_t heads);

  ad::Var operator()(ad::Graph& g, ad::Var x) const;
};

// Scaled dot-product attention over tokens [T x 3d] packed as (Q | K | V).
ad::Var multi_head_attention(ad::Var qkv, std::size_t heads);

// Fixed 2-D sine/cosine table [rows*cols x dim]; dim must be divisible by 4.
// The first dim/2 columns encode the row coordinate, the rest the column.
ad::Tensor sincos_2d(std::size_t rows, std::size_t cols, std::size_t dim);

}  // namespace cyclone::nn
