#pragma once

#include <cstdint>
#include <vector>

#include "cognisnn/tape.hpp"
#include "cognisnn/tensor.hpp"

namespace cognisnn {

// ---------------------------------------------------------------------------
// Raw kernels (pure tensor functions). Inputs of rank 3 ([C,H,W]) are treated
// as a group of one; group inputs are [G,C,H,W].
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding);
Tensor conv2d_grad_input(const Tensor& dy, const Tensor& kernels,
                         const std::vector<std::size_t>& input_shape,
                         std::size_t stride, std::size_t padding);
Tensor conv2d_grad_kernels(const Tensor& dy, const Tensor& input,
                           const std::vector<std::size_t>& kernel_shape,
                           std::size_t stride, std::size_t padding);

Tensor avg_pool(const Tensor& input, std::size_t kernel);
Tensor avg_pool_grad(const Tensor& dy, std::size_t kernel,
                     const std::vector<std::size_t>& input_shape);

// mean over the spatial dims: [G,C,H,W] -> [G,C]
Tensor global_avg_pool(const Tensor& input);

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct BnStats {
    Tensor mean;  // [C]
    Tensor var;   // [C], biased
};

// Per-channel statistics over every non-channel dim (dim 1 is the channel).
BnStats batch_norm_stats(const Tensor& input);

Tensor batch_norm_apply(const Tensor& input, const Tensor& mean, const Tensor& var,
                        const Tensor& gamma, const Tensor& beta, double eps);

// ---------------------------------------------------------------------------
// Tape operations
// ---------------------------------------------------------------------------

Var op_leaf(Tape& t, Tensor v, const char* tag = "leaf");

Var op_add(Tape& t, Var a, Var b);
Var op_sub(Tape& t, Var a, Var b);
Var op_mul(Tape& t, Var a, Var b);
// ca*a + cb*b with constant coefficients
Var op_lincomb(Tape& t, Var a, Var b, double ca, double cb);
// k*x + c elementwise with constants
Var op_affine(Tape& t, Var x, double k, double c);
Var op_sigmoid(Tape& t, Var x);
// s is a one-element var broadcast over x
Var op_scale_by(Tape& t, Var s, Var x);
Var op_addn(Tape& t, const std::vector<Var>& xs);

Var op_conv2d(Tape& t, Var x, Var w, std::size_t stride, std::size_t padding);
Var op_avg_pool(Tape& t, Var x, std::size_t kernel);
Var op_global_avg_pool(Tape& t, Var x);
Var op_linear(Tape& t, Var x, Var w, Var b);

struct BnRunning {
    Tensor mean;  // [C]
    Tensor var;   // [C], unbiased
    double momentum = 0.1;
};

// Train mode normalizes with batch statistics and updates `running` (when
// non-null) via exponential moving average as a forward side effect.
Var op_batch_norm_train(Tape& t, Var x, Var gamma, Var beta, BnRunning* running,
                        double eps);
Var op_batch_norm_eval(Tape& t, Var x, Var gamma, Var beta, const BnRunning& running,
                       double eps);

// concatenate along dim 0; all parts share the remaining dims
Var op_concat0(Tape& t, const std::vector<Var>& parts);
// rows [offset, offset+count) of dim 0
Var op_slice0(Tape& t, Var x, std::size_t offset, std::size_t count);

Var op_sum_all(Tape& t, Var x);
Var op_mean_all(Tape& t, Var x);

// mean over batch of softmax cross-entropy rows; labels.size() == B
Var op_softmax_cross_entropy(Tape& t, Var logits, const std::vector<uint32_t>& labels);

// distillation: -sum_k softmax(teacher/temp)_k * log softmax(student/temp)_k,
// averaged over the batch; teacher logits are constants
Var op_distill_cross_entropy(Tape& t, Var student_logits, const Tensor& teacher_logits,
                             double temperature);

// softmax over the last dim (no tape), helper for reports
Tensor softmax_rows(const Tensor& logits, double temperature = 1.0);

}  // namespace cognisnn
