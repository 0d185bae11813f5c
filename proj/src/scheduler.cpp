#include "bgreplace/scheduler.hpp"

#include <algorithm>
#include <cmath>

namespace bgreplace {

LatentTensor::LatentTensor(Array4<double> data) : m_data(std::move(data)) {
    for (double v : m_data.data()) {
        if (!std::isfinite(v)) throw_invalid("LatentTensor: non-finite value");
    }
}

LatentTensor to_tensor(const VideoClip& clip) { return LatentTensor(clip.pixels().cast<double>()); }

VideoClip to_clip(const LatentTensor& tensor, double fps) {
    return VideoClip(tensor.data().cast<float>(), fps);
}

NoiseSchedule make_schedule(int t_train, int t_infer, double beta_start, double beta_end) {
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw_invalid("make_schedule: need 0 < beta_start <= beta_end < 1");
    }
    if (t_infer < 1 || t_infer > t_train) {
        throw_invalid("make_schedule: need 1 <= t_infer <= t_train");
    }
    NoiseSchedule s;
    s.m_train_steps = t_train;
    s.m_betas.resize(t_train);
    const double lo = std::sqrt(beta_start);
    const double hi = std::sqrt(beta_end);
    for (int i = 0; i < t_train; ++i) {
        const double frac = t_train == 1 ? 0.0 : static_cast<double>(i) / (t_train - 1);
        const double r = lo + frac * (hi - lo);
        s.m_betas[i] = r * r;
    }
    s.m_alpha_bar.resize(t_train + 1);
    s.m_alpha_bar[0] = 1.0;
    for (int t = 1; t <= t_train; ++t) s.m_alpha_bar[t] = s.m_alpha_bar[t - 1] * (1.0 - s.m_betas[t - 1]);

    for (int k = t_infer; k >= 1; --k) {
        s.m_inference.push_back(static_cast<int>((static_cast<long long>(t_train) * k) / t_infer));
    }
    return s;
}

double NoiseSchedule::alpha_bar(int t) const {
    if (!is_valid_timestep(t)) {
        throw_invalid("timestep " + std::to_string(t) + " outside [0, " + std::to_string(m_train_steps) + "]");
    }
    return m_alpha_bar[t];
}

int NoiseSchedule::timestep_for_remaining(int remaining) const {
    const int T = inference_count();
    if (remaining < 0 || remaining > T) {
        throw_invalid("step count " + std::to_string(remaining) + " outside [0, " + std::to_string(T) + "]");
    }
    return remaining == 0 ? 0 : m_inference[T - remaining];
}

int NoiseSchedule::previous_timestep(int t) const {
    auto it = std::find(m_inference.begin(), m_inference.end(), t);
    if (it == m_inference.end()) throw_invalid("timestep " + std::to_string(t) + " is not on the inference ladder");
    ++it;
    return it == m_inference.end() ? 0 : *it;
}

namespace {

// out = a * x + b * y
LatentTensor axpby(double a, const LatentTensor& x, double b, const LatentTensor& y, const char* what) {
    require_same_shape(x.data(), y.data(), what);
    Array4<double> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
    return LatentTensor(std::move(out));
}

}  // namespace

LatentTensor add_noise(const LatentTensor& x0, const LatentTensor& eps, int t, const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar(t);
    return axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps, "add_noise");
}

LatentTensor pred_x0(const LatentTensor& x_t, const LatentTensor& eps_pred, int t, const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar(t);
    if (ab < kAlphaBarFloor) {
        throw_invalid("pred_x0: degenerate timestep " + std::to_string(t) + " (alpha_bar below 1e-8)");
    }
    const double inv = 1.0 / std::sqrt(ab);
    return axpby(inv, x_t, -std::sqrt(1.0 - ab) * inv, eps_pred, "pred_x0");
}

LatentTensor ddim_step(const LatentTensor& x0_hat, const LatentTensor& eps_pred, int t_prev,
                       const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar(t_prev);
    return axpby(std::sqrt(ab), x0_hat, std::sqrt(1.0 - ab), eps_pred, "ddim_step");
}

int steps_from_fraction(double fraction, int total_steps) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw_invalid("step fraction must lie in [0, 1]");
    return static_cast<int>(std::lround(fraction * total_steps));
}

}  // namespace bgreplace
