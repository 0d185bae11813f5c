#pragma once

#include <span>
#include <vector>

#include "bgreplace/tensor.hpp"
#include "bgreplace/video.hpp"

namespace bgreplace {

/// Compressed latent tensor (f x h x w x c). Kept in double precision so the
/// forward/inverse noising identities hold far below the 1e-6 level.
class LatentTensor {
public:
    LatentTensor() = default;
    explicit LatentTensor(Array4<double> data);

    const Shape4& shape() const { return m_data.shape(); }
    const Array4<double>& data() const { return m_data; }
    std::size_t size() const { return m_data.size(); }
    double operator[](std::size_t i) const { return m_data[i]; }

private:
    Array4<double> m_data;
};

/// Pixel clip viewed as a double tensor (no copy semantics beyond the cast).
LatentTensor to_tensor(const VideoClip& clip);
/// Rounds a double tensor back to a 32-bit clip; the tensor must have 3 channels.
VideoClip to_clip(const LatentTensor& tensor, double fps = 24.0);

inline constexpr double kDefaultBetaStart = 0.00085;
inline constexpr double kDefaultBetaEnd = 0.012;
inline constexpr int kDefaultTrainSteps = 1000;
inline constexpr int kDefaultInferenceSteps = 20;
inline constexpr double kAlphaBarFloor = 1e-8;

/// Cumulative signal-retention table plus the inference timestep ladder.
///
/// alpha_bar(0) is exactly 1; alpha_bar(t) = prod_{s=1..t} (1 - beta_s) for
/// t = 1..train_steps, with betas spaced linearly in sqrt-domain. The
/// inference ladder is train_steps * k / inference_count for
/// k = inference_count..1, strictly decreasing.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    int train_steps() const { return m_train_steps; }
    int inference_count() const { return static_cast<int>(m_inference.size()); }

    double alpha_bar(int t) const;
    std::span<const double> alpha_bar_table() const { return m_alpha_bar; }
    std::span<const double> betas() const { return m_betas; }
    const std::vector<int>& inference_steps() const { return m_inference; }

    /// Timestep at which `remaining` denoising steps are left: 0 for remaining == 0,
    /// otherwise inference_steps()[T - remaining].
    int timestep_for_remaining(int remaining) const;

    /// Next smaller timestep on the ladder after `t`, or 0 at the end.
    int previous_timestep(int t) const;

    bool is_valid_timestep(int t) const { return t >= 0 && t <= m_train_steps; }

private:
    friend NoiseSchedule make_schedule(int, int, double, double);

    int m_train_steps = 0;
    std::vector<double> m_betas;      // index s-1 holds beta_s
    std::vector<double> m_alpha_bar;  // index t, size train_steps + 1
    std::vector<int> m_inference;
};

NoiseSchedule make_schedule(int t_train = kDefaultTrainSteps, int t_infer = kDefaultInferenceSteps,
                            double beta_start = kDefaultBetaStart, double beta_end = kDefaultBetaEnd);

/// x_t = sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps.
LatentTensor add_noise(const LatentTensor& x0, const LatentTensor& eps, int t, const NoiseSchedule& sched);

/// x0 = (x_t - sqrt(1 - ab_t) * eps) / sqrt(ab_t). Fails when ab_t < 1e-8.
LatentTensor pred_x0(const LatentTensor& x_t, const LatentTensor& eps_pred, int t, const NoiseSchedule& sched);

/// Deterministic DDIM update toward t_prev:
/// x_prev = sqrt(ab_prev) * x0_hat + sqrt(1 - ab_prev) * eps_pred.
LatentTensor ddim_step(const LatentTensor& x0_hat, const LatentTensor& eps_pred, int t_prev,
                       const NoiseSchedule& sched);

/// Step count for a fraction of T, rounded to the nearest integer (0.7 * 20 -> 14).
int steps_from_fraction(double fraction, int total_steps);

}  // namespace bgreplace
