#pragma once

#include <vector>

#include "semloc/kernels.hpp"
#include "semloc/recognition.hpp"
#include "semloc/types.hpp"

namespace semloc {

enum class LikelihoodMode { lfm, slfm, slamer };

const char* mode_name(LikelihoodMode m);
LikelihoodMode mode_from_name(const std::string& name);

// Every model constant in one place. Simplex flooring for the Dirichlet and
// the beam subsampling stride ride along since they shape the likelihood.
struct Hyperparameters {
    double a1 = 1.2;       // Dirichlet concentration, true class
    double a2 = 1.0;       // Dirichlet concentration, other classes
    double sigma_d = 0.5;  // m, class prior
    double z_hit = 0.9;
    double z_max = 0.05;
    double z_rand = 0.05;
    double sigma = 0.2;    // m, LFM hit component
    double lambda = 0.1;   // 1/m, SLFM exponential
    double r_max = 20.0;   // m
    int beam_stride = 5;
    std::vector<LabelId> unknown_labels{kLabelOthers};  // SLFM exponential branch

    void validate() const;  // throws std::invalid_argument
    bool is_unknown(LabelId l) const;
};

// Normalized prior over classes given pose and map (one entry per label id).
struct ClassPrior {
    std::vector<double> p;
};

// Exact unicycle integration; arc motion above |w*dt| = 1e-6 rad, straight
// line limit below.
Pose2D motion_model(const Pose2D& pose, const ControlInput& u);

// Motion model applied to u perturbed by N(0, noise).
Pose2D sample_motion(const Pose2D& pose, const ControlInput& u, const ControlNoise& noise,
                     Rng& rng);

// Likelihood field model against the physical-occupancy distance field.
// `pose` is the sensor pose in world coordinates; beam.angle is relative to it.
double lfm_point_likelihood(const SemanticGridMap& map, const Pose2D& pose, const Beam& beam,
                            const Hyperparameters& hyper);

// Same mixture evaluated against one label's semantic distance field.
double lfm_point_likelihood_for_label(const SemanticGridMap& map, LabelId label,
                                      const Pose2D& pose, const Beam& beam,
                                      const Hyperparameters& hyper);

// Truncated exponential over (0, r_max] used for unknown classes.
double truncated_exponential_pdf(double r, double lambda, double r_max);

// Semantic likelihood field model: the beam is scored against the distance
// field of its most probable class, or the truncated exponential when that
// class is configured unknown.
double slfm_point_likelihood(const SemanticGridMap& map, const Pose2D& pose, const Beam& beam,
                             const ClassSimplex& chat, const Hyperparameters& hyper);

// Representative distance per label: mean closest-distance over points
// sampled at resolution intervals along the object segment.
std::vector<double> object_label_distances(const SemanticGridMap& map, const Pose2D& robot_pose,
                                           const ObjectHypothesis& obj);

// Gaussian scores over those distances, normalized to a proper prior.
ClassPrior class_prior(const SemanticGridMap& map, const Pose2D& robot_pose,
                       const ObjectHypothesis& obj, const Hyperparameters& hyper);

// Dirichlet recognition model, log domain. Concentration a1 on the
// hypothesized true label, a2 elsewhere; the simplex is floored at 0.01/L.
double dirichlet_recognition_log_likelihood(const ClassSimplex& chat, LabelId true_label,
                                            int label_count, const Hyperparameters& hyper);
double dirichlet_recognition_likelihood(const ClassSimplex& chat, LabelId true_label,
                                        int label_count, const Hyperparameters& hyper);

// Inner sum of the object likelihood: sum over labels of recognition-model
// density times the normalized class prior.
double slamer_object_term(const SemanticGridMap& map, const Pose2D& robot_pose,
                          const ObjectHypothesis& obj, const Hyperparameters& hyper);

// Per-step precomputation shared across particles: strided beam endpoints in
// the robot frame, per-beam mixture addends, SLFM label groups, and the
// pose-independent Dirichlet rows of the slamer object term.
class LikelihoodContext {
public:
    LikelihoodContext(const SemanticGridMap& map, const Scan& scan, const RecognitionFrame& frame,
                      const Hyperparameters& hyper, LikelihoodMode mode);

    double log_likelihood(const Pose2D& robot_pose) const;

    LikelihoodMode mode() const { return mode_; }
    int beam_count_used() const { return static_cast<int>(ex_.size()); }

private:
    struct BeamGroup {
        kernels::FieldView field;
        std::vector<double> ex, ey, addend;
    };

    double object_log_term(const kernels::Se2& se2, size_t k) const;

    const SemanticGridMap& map_;
    const Hyperparameters hyper_;
    LikelihoodMode mode_;
    Pose2D sensor_offset_;
    double zhit_norm_ = 0.0;
    double inv_two_sigma_sq_ = 0.0;

    // lfm / slamer localization beams against the occupancy field
    kernels::FieldView occupancy_;
    std::vector<double> ex_, ey_, addend_;

    // slfm groups and the pose-independent unknown-branch constant
    std::vector<BeamGroup> groups_;
    double constant_log_ = 0.0;

    // slamer objects: sample points (robot frame) and Dirichlet rows
    struct ObjectTerm {
        std::vector<double> sx, sy;               // sample points, robot frame
        std::vector<double> dirichlet;            // density per label
        std::vector<kernels::FieldView> fields;   // per label
    };
    std::vector<ObjectTerm> objects_;
    double sigma_d_inv_two_sq_ = 0.0;
};

// Full per-particle log-likelihood; builds a context per call. Prefer a
// shared LikelihoodContext when evaluating many particles.
double particle_log_likelihood(const SemanticGridMap& map, const Pose2D& robot_pose,
                               const Scan& scan, const RecognitionFrame& frame,
                               const Hyperparameters& hyper, LikelihoodMode mode);

}  // namespace semloc
