#pragma once

#include <vector>

#include <Eigen/Dense>

namespace bgreplace {

using Matrix = Eigen::MatrixXd;

/// Row-stochastic weights softmax(q k^T / sqrt(d)), with per-row max subtraction.
Matrix attention_weights(const Matrix& q, const Matrix& k);

/// Single-head scaled dot-product attention: q is n x d, k and v are m x d.
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v);

/// Per-frame query/key/value matrices; frame 0 is the anchor frame.
struct AttentionBatch {
    std::vector<Matrix> q;
    std::vector<Matrix> k;
    std::vector<Matrix> v;

    std::size_t frames() const { return q.size(); }
};

/// output_i = attention(q_i, k_i, v_i)
std::vector<Matrix> self_attention(const AttentionBatch& batch);

/// output_i = attention(q_i, k_0, v_0): every frame reads keys and values of the first frame.
std::vector<Matrix> cross_frame_attention(const AttentionBatch& batch);

}  // namespace bgreplace
