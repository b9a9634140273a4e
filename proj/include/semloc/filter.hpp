#pragma once

#include <cstdint>
#include <vector>

#include "semloc/models.hpp"
#include "semloc/recognition.hpp"
#include "semloc/types.hpp"

namespace semloc {

struct Particle {
    Pose2D pose;
    double log_weight = 0.0;
};

// Per-object class posterior produced each step; not carried across steps.
struct ObjectPosterior {
    int object_index = 0;
    std::vector<double> p;
    LabelId map_label = kLabelFree;
};

struct StepResult {
    Pose2D estimate;
    double ess = 0.0;
    bool resampled = false;
    std::vector<ObjectPosterior> posteriors;
};

struct FilterConfig {
    int particle_count = 200;
    Hyperparameters hyper;
    LikelihoodMode mode = LikelihoodMode::lfm;
    ControlNoise motion_noise;
    double spread_x = 0.0;  // std devs of the initial particle cloud
    double spread_y = 0.0;
    double spread_theta = 0.0;
};

// Rao-Blackwellized particle filter: particles carry only (pose, weight);
// object class posteriors are computed analytically per step at the maximum
// likelihood particle and emitted, never stored.
class ParticleFilter {
public:
    ParticleFilter(const SemanticGridMap& map, const FilterConfig& config, const Pose2D& pose0,
                   uint64_t seed);

    void predict(const ControlInput& u);
    void predict(const ControlInput& u, const ControlNoise& noise);

    // Adds the per-particle log-likelihood and renormalizes the weights.
    void weight(const Scan& scan, const RecognitionFrame& frame);

    // Class posterior per object at the max-likelihood particle's pose.
    std::vector<ObjectPosterior> update_recognition(const RecognitionFrame& frame) const;

    Pose2D estimate() const;   // weighted mean, circular in theta
    double ess() const;        // 1 / sum of squared normalized weights
    bool resample_if_needed();

    // predict -> weight -> update_recognition -> estimate -> resample.
    StepResult step(const ControlInput& u, const Scan& scan, const RecognitionFrame& frame);
    // Odometry-only step (measurement disabled).
    StepResult step(const ControlInput& u);

    const std::vector<Particle>& particles() const { return particles_; }
    int particle_count() const { return static_cast<int>(particles_.size()); }
    int max_likelihood_index() const { return max_likelihood_index_; }
    int step_counter() const { return step_counter_; }
    LikelihoodMode mode() const { return config_.mode; }
    Rng& rng() { return rng_; }

private:
    void normalize();

    const SemanticGridMap& map_;
    FilterConfig config_;
    std::vector<Particle> particles_;
    int max_likelihood_index_ = 0;
    int step_counter_ = 0;
    Rng rng_;
};

// Systematic (low variance) resampling; multiplicity of index i differs from
// n * weight[i] by less than one.
std::vector<int> systematic_resample_indices(const std::vector<double>& weights, int n, Rng& rng);

}  // namespace semloc
