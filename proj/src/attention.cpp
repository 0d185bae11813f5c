#include "bgreplace/attention.hpp"

#include <cmath>
#include <string>

#include "bgreplace/error.hpp"

namespace bgreplace {

Matrix attention_weights(const Matrix& q, const Matrix& k) {
    if (q.cols() != k.cols() || q.cols() < 1) {
        throw_invalid("attention: feature width mismatch (q d=" + std::to_string(q.cols()) +
                      ", k d=" + std::to_string(k.cols()) + ")");
    }
    if (k.rows() < 1) throw_invalid("attention: no keys");
    Matrix logits = (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double peak = logits.row(r).maxCoeff();
        logits.row(r) = (logits.row(r).array() - peak).exp().matrix();
        logits.row(r) /= logits.row(r).sum();
    }
    return logits;
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (k.rows() != v.rows()) {
        throw_invalid("attention: key/value token counts differ (" + std::to_string(k.rows()) + " vs " +
                      std::to_string(v.rows()) + ")");
    }
    return attention_weights(q, k) * v;
}

namespace {

void validate(const AttentionBatch& batch) {
    if (batch.q.empty()) throw_invalid("attention batch is empty");
    if (batch.k.size() != batch.q.size() || batch.v.size() != batch.q.size()) {
        throw_invalid("attention batch: q/k/v frame counts differ");
    }
    const Eigen::Index d = batch.q.front().cols();
    for (std::size_t i = 0; i < batch.q.size(); ++i) {
        if (batch.q[i].cols() != d || batch.k[i].cols() != d) {
            throw_invalid("attention batch: frame " + std::to_string(i) + " has a different feature width");
        }
    }
}

}  // namespace

std::vector<Matrix> self_attention(const AttentionBatch& batch) {
    validate(batch);
    std::vector<Matrix> out;
    out.reserve(batch.frames());
    for (std::size_t i = 0; i < batch.frames(); ++i) out.push_back(attention(batch.q[i], batch.k[i], batch.v[i]));
    return out;
}

std::vector<Matrix> cross_frame_attention(const AttentionBatch& batch) {
    validate(batch);
    std::vector<Matrix> out;
    out.reserve(batch.frames());
    for (std::size_t i = 0; i < batch.frames(); ++i) out.push_back(attention(batch.q[i], batch.k[0], batch.v[0]));
    return out;
}

}  // namespace bgreplace
