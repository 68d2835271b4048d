#pragma once

#include <span>
#include <vector>

#include "blm/graph.hpp"

namespace blm::ops {

// x: B x I, w: I x O, b: O  ->  B x O.
template <class T>
Var linear(Graph<T>& g, Var x, Var w, Var b);

// Valid, stride-1 cross-correlation.
// x: B x Cin x S x N x M, w: Cout x Cin x kS x kN x kM, b: Cout
//   -> B x Cout x (S-kS+1) x (N-kN+1) x (M-kM+1).
template <class T>
Var conv3d(Graph<T>& g, Var x, Var w, Var b);

// x: B x Cin x H x W, w: Cout x Cin x kH x kW, b: Cout -> B x Cout x H' x W'.
template <class T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b);

template <class T>
Var relu(Graph<T>& g, Var x);

template <class T>
Var reshape(Graph<T>& g, Var x, Shape shape);

// Columns [begin, end) of a B x F matrix.
template <class T>
Var slice_cols(Graph<T>& g, Var x, std::size_t begin, std::size_t end);

// Concatenate B x F_i matrices along columns.
template <class T>
Var concat_cols(Graph<T>& g, const std::vector<Var>& parts);

template <class T>
Var add(Graph<T>& g, Var a, Var b);

template <class T>
Var scale(Graph<T>& g, Var a, T s);

// Elementwise product with a constant tensor of the same shape.
template <class T>
Var mul_const(Graph<T>& g, Var a, const Tensor<T>& m);

template <class T>
Var sum(Graph<T>& g, Var a);

template <class T>
Var mean(Graph<T>& g, Var a);

// z = mu + exp(log_sigma) * noise, all B x k.
template <class T>
Var gaussian_sample(Graph<T>& g, Var mu, Var log_sigma, const Tensor<T>& noise);

// Per row: 1/2 sum_k (mu^2 + sigma^2 - 1 - log sigma^2)  ->  B.
template <class T>
Var kl_gaussian(Graph<T>& g, Var mu, Var log_sigma);

// Per row: softmax((noise + log softmax(logits)) / tau)  ->  B x K.
template <class T>
Var gumbel_softmax(Graph<T>& g, Var logits, const Tensor<T>& noise, T tau);

// Per row: KL(softmax(logits) || uniform)  ->  B.
template <class T>
Var kl_categorical_uniform(Graph<T>& g, Var logits);

// Per-instance answer candidates for the max-margin loss.
template <class T>
struct AnswerSet {
  Tensor<T> embeddings;  // A x D
  std::size_t correct = 0;
};

// Per row b: sum_{i != correct} [1 - cos(e_c, p_b) + cos(e_i, p_b)]^+  ->  B.
template <class T>
Var max_margin(Graph<T>& g, Var pred, std::span<const AnswerSet<T>> answers);

}  // namespace blm::ops
