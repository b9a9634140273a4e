#include "semloc/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace semloc {

const char* mode_name(LikelihoodMode m) {
    switch (m) {
        case LikelihoodMode::lfm:
            return "lfm";
        case LikelihoodMode::slfm:
            return "slfm";
        case LikelihoodMode::slamer:
            return "slamer";
    }
    return "?";
}

LikelihoodMode mode_from_name(const std::string& name) {
    if (name == "lfm")
        return LikelihoodMode::lfm;
    if (name == "slfm")
        return LikelihoodMode::slfm;
    if (name == "slamer")
        return LikelihoodMode::slamer;
    throw std::invalid_argument("unknown mode '" + name + "' (lfm|slfm|slamer)");
}

void Hyperparameters::validate() const {
    if (a1 <= 0.0 || a2 <= 0.0)
        throw std::invalid_argument("dirichlet concentrations a1, a2 must be positive");
    if (sigma <= 0.0 || sigma_d <= 0.0 || lambda <= 0.0 || r_max <= 0.0)
        throw std::invalid_argument("sigma, sigma_d, lambda, r_max must be positive");
    if (z_hit < 0.0 || z_max < 0.0 || z_rand < 0.0 ||
        std::abs(z_hit + z_max + z_rand - 1.0) > 1e-9)
        throw std::invalid_argument("z_hit + z_max + z_rand must equal 1 with each >= 0");
    if (beam_stride < 1)
        throw std::invalid_argument("beam_stride must be >= 1");
}

bool Hyperparameters::is_unknown(LabelId l) const {
    return std::find(unknown_labels.begin(), unknown_labels.end(), l) != unknown_labels.end();
}

Pose2D motion_model(const Pose2D& pose, const ControlInput& u) {
    const double wdt = u.w * u.dt;
    if (std::abs(wdt) < 1e-6) {
        return Pose2D(pose.x + u.v * u.dt * std::cos(pose.theta),
                      pose.y + u.v * u.dt * std::sin(pose.theta), pose.theta + wdt);
    }
    const double radius = u.v / u.w;
    const double theta1 = pose.theta + wdt;
    return Pose2D(pose.x + radius * (std::sin(theta1) - std::sin(pose.theta)),
                  pose.y + radius * (std::cos(pose.theta) - std::cos(theta1)), theta1);
}

Pose2D sample_motion(const Pose2D& pose, const ControlInput& u, const ControlNoise& noise,
                     Rng& rng) {
    double l11, l21, l22;
    noise.cholesky(l11, l21, l22);
    std::normal_distribution<double> unit;
    const double n1 = unit(rng);
    const double n2 = unit(rng);
    ControlInput noisy = u;
    noisy.v += l11 * n1;
    noisy.w += l21 * n1 + l22 * n2;
    return motion_model(pose, noisy);
}

namespace {

inline double gaussian_norm(double sigma) {
    return 1.0 / (sigma * std::sqrt(2.0 * M_PI));
}

inline Point2D beam_endpoint(const Pose2D& pose, const Beam& beam) {
    const double a = pose.theta + beam.angle;
    return Point2D{pose.x + beam.range * std::cos(a), pose.y + beam.range * std::sin(a)};
}

inline double mixture(double dist, double range, const Hyperparameters& h) {
    const double hit = gaussian_norm(h.sigma) * std::exp(-dist * dist / (2.0 * h.sigma * h.sigma));
    const double max_term = (range >= h.r_max) ? 1.0 : 0.0;
    return h.z_hit * hit + h.z_max * max_term + h.z_rand / h.r_max;
}

}  // namespace

double lfm_point_likelihood(const SemanticGridMap& map, const Pose2D& pose, const Beam& beam,
                            const Hyperparameters& hyper) {
    const double d = map.closest_obstacle_distance(beam_endpoint(pose, beam));
    return mixture(d, beam.range, hyper);
}

double lfm_point_likelihood_for_label(const SemanticGridMap& map, LabelId label,
                                      const Pose2D& pose, const Beam& beam,
                                      const Hyperparameters& hyper) {
    const double d = map.closest_distance(label, beam_endpoint(pose, beam));
    return mixture(d, beam.range, hyper);
}

double truncated_exponential_pdf(double r, double lambda, double r_max) {
    if (r <= 0.0 || r > r_max)
        return 0.0;
    return lambda * std::exp(-lambda * r) / (-std::expm1(-lambda * r_max));
}

double slfm_point_likelihood(const SemanticGridMap& map, const Pose2D& pose, const Beam& beam,
                             const ClassSimplex& chat, const Hyperparameters& hyper) {
    const LabelId best = chat.argmax();
    if (hyper.is_unknown(best))
        return truncated_exponential_pdf(beam.range, hyper.lambda, hyper.r_max);
    return lfm_point_likelihood_for_label(map, best, pose, beam, hyper);
}

std::vector<double> object_label_distances(const SemanticGridMap& map, const Pose2D& robot_pose,
                                           const ObjectHypothesis& obj) {
    const double len = obj.length();
    const int segments = std::max(1, static_cast<int>(std::round(len / map.resolution())));
    const int samples = segments + 1;

    const int label_count = map.classes().size();
    std::vector<double> sums(label_count, 0.0);
    for (int i = 0; i < samples; ++i) {
        const double t = (samples == 1) ? 0.5 : static_cast<double>(i) / segments;
        const Point2D local{obj.p1.x + t * (obj.p2.x - obj.p1.x),
                            obj.p1.y + t * (obj.p2.y - obj.p1.y)};
        const Point2D world = transform_point(robot_pose, local);
        for (LabelId l = 0; l < label_count; ++l)
            sums[l] += map.closest_distance(l, world);
    }
    for (double& s : sums)
        s /= samples;
    return sums;
}

ClassPrior class_prior(const SemanticGridMap& map, const Pose2D& robot_pose,
                       const ObjectHypothesis& obj, const Hyperparameters& hyper) {
    const auto dist = object_label_distances(map, robot_pose, obj);
    ClassPrior prior;
    prior.p.resize(dist.size());
    const double inv2s2 = 1.0 / (2.0 * hyper.sigma_d * hyper.sigma_d);
    double sum = 0.0;
    for (size_t l = 0; l < dist.size(); ++l) {
        prior.p[l] = std::exp(-dist[l] * dist[l] * inv2s2);
        sum += prior.p[l];
    }
    for (double& v : prior.p)
        v /= sum;
    return prior;
}

double dirichlet_recognition_log_likelihood(const ClassSimplex& chat, LabelId true_label,
                                            int label_count, const Hyperparameters& hyper) {
    if (hyper.a1 <= 0.0 || hyper.a2 <= 0.0)
        throw std::invalid_argument("dirichlet concentrations must be positive");
    if (chat.size() != label_count)
        throw std::invalid_argument("class simplex size does not match label count");
    if (true_label < 0 || true_label >= label_count)
        throw std::invalid_argument("true label outside class table");

    const ClassSimplex floored = chat.floored(0.01 / label_count);
    const double sum_alpha = hyper.a1 + hyper.a2 * (label_count - 1);
    double log_pdf = std::lgamma(sum_alpha) - std::lgamma(hyper.a1) -
                     (label_count - 1) * std::lgamma(hyper.a2);
    for (int l = 0; l < label_count; ++l) {
        const double alpha = (l == true_label) ? hyper.a1 : hyper.a2;
        log_pdf += (alpha - 1.0) * std::log(floored.p[l]);
    }
    return log_pdf;
}

double dirichlet_recognition_likelihood(const ClassSimplex& chat, LabelId true_label,
                                        int label_count, const Hyperparameters& hyper) {
    return std::exp(dirichlet_recognition_log_likelihood(chat, true_label, label_count, hyper));
}

double slamer_object_term(const SemanticGridMap& map, const Pose2D& robot_pose,
                          const ObjectHypothesis& obj, const Hyperparameters& hyper) {
    const int label_count = map.classes().size();
    const ClassPrior prior = class_prior(map, robot_pose, obj, hyper);
    double term = 0.0;
    for (LabelId l = 0; l < label_count; ++l)
        term += dirichlet_recognition_likelihood(obj.probs, l, label_count, hyper) * prior.p[l];
    return term;
}

// ---------------------------------------------------------------------------
// LikelihoodContext
// ---------------------------------------------------------------------------

LikelihoodContext::LikelihoodContext(const SemanticGridMap& map, const Scan& scan,
                                     const RecognitionFrame& frame, const Hyperparameters& hyper,
                                     LikelihoodMode mode)
    : map_(map), hyper_(hyper), mode_(mode), sensor_offset_(scan.params.sensor_offset) {
    hyper_.validate();
    if (scan.ranges.empty())
        throw std::invalid_argument("empty scan");
    if (std::abs(scan.params.r_max - hyper_.r_max) > 1e-9)
        throw std::invalid_argument("scan r_max does not match model r_max");

    zhit_norm_ = hyper_.z_hit * gaussian_norm(hyper_.sigma);
    inv_two_sigma_sq_ = 1.0 / (2.0 * hyper_.sigma * hyper_.sigma);
    sigma_d_inv_two_sq_ = 1.0 / (2.0 * hyper_.sigma_d * hyper_.sigma_d);
    occupancy_ = kernels::make_field_view(map, map.occupancy_field());

    const double p_rand = hyper_.z_rand / hyper_.r_max;
    const int label_count = map.classes().size();

    auto beam_addend = [&](int k) {
        return (scan.ranges[k] >= hyper_.r_max) ? hyper_.z_max + p_rand : p_rand;
    };

    if (mode_ == LikelihoodMode::slfm) {
        if (static_cast<int>(frame.beam_labels.size()) != scan.beam_count())
            throw std::invalid_argument("slfm mode requires per-beam recognition labels");
        // Group strided beams by their most probable class. Beams without a
        // label (max range) fall back to the occupancy field; unknown-class
        // beams contribute a pose-independent exponential term.
        std::vector<int> group_of(label_count + 1, -1);
        auto group_for = [&](int slot, const kernels::FieldView& view) {
            if (group_of[slot] < 0) {
                group_of[slot] = static_cast<int>(groups_.size());
                groups_.push_back(BeamGroup{view, {}, {}, {}});
            }
            return group_of[slot];
        };
        for (int k = 0; k < scan.beam_count(); k += hyper_.beam_stride) {
            const LabelId label = frame.beam_labels[k];
            if (label >= 0 && hyper_.is_unknown(label)) {
                constant_log_ += std::log(
                    truncated_exponential_pdf(scan.ranges[k], hyper_.lambda, hyper_.r_max));
                continue;
            }
            int g;
            if (label < 0) {
                g = group_for(label_count, occupancy_);
            } else {
                g = group_for(label, kernels::make_field_view(map, map.field(label)));
            }
            const Point2D p = scan.endpoint(k);
            groups_[g].ex.push_back(p.x);
            groups_[g].ey.push_back(p.y);
            groups_[g].addend.push_back(beam_addend(k));
        }
    } else {
        for (int k = 0; k < scan.beam_count(); k += hyper_.beam_stride) {
            const Point2D p = scan.endpoint(k);
            ex_.push_back(p.x);
            ey_.push_back(p.y);
            addend_.push_back(beam_addend(k));
        }
    }

    if (mode_ == LikelihoodMode::slamer) {
        objects_.reserve(frame.objects.size());
        for (const auto& obj : frame.objects) {
            if (obj.probs.size() != label_count)
                throw std::invalid_argument("object class simplex does not match class table");
            ObjectTerm term;
            const double len = obj.length();
            const int segments =
                std::max(1, static_cast<int>(std::round(len / map.resolution())));
            for (int i = 0; i <= segments; ++i) {
                const double t = static_cast<double>(i) / segments;
                term.sx.push_back(obj.p1.x + t * (obj.p2.x - obj.p1.x));
                term.sy.push_back(obj.p1.y + t * (obj.p2.y - obj.p1.y));
            }
            term.dirichlet.resize(label_count);
            term.fields.reserve(label_count);
            for (LabelId l = 0; l < label_count; ++l) {
                term.dirichlet[l] =
                    dirichlet_recognition_log_likelihood(obj.probs, l, label_count, hyper_);
                term.fields.push_back(kernels::make_field_view(map, map.field(l)));
            }
            objects_.push_back(std::move(term));
        }
    }
}

double LikelihoodContext::object_log_term(const kernels::Se2& se2, size_t k) const {
    const auto& kset = kernels::active();
    const ObjectTerm& obj = objects_[k];
    const int n = static_cast<int>(obj.sx.size());
    const int label_count = static_cast<int>(obj.dirichlet.size());

    thread_local std::vector<double> wx, wy, dist;
    wx.resize(n);
    wy.resize(n);
    dist.resize(n);
    kset.se2_transform(se2, obj.sx.data(), obj.sy.data(), wx.data(), wy.data(), n);

    // Normalized Gaussian prior over labels from the mean sample distance,
    // then log-sum-exp over dirichlet * prior.
    thread_local std::vector<double> scores;
    scores.resize(label_count);
    double score_sum = 0.0;
    for (int l = 0; l < label_count; ++l) {
        kset.field_lookup(obj.fields[l], wx.data(), wy.data(), dist.data(), n);
        double mean = 0.0;
        for (int i = 0; i < n; ++i)
            mean += dist[i];
        mean /= n;
        scores[l] = std::exp(-mean * mean * sigma_d_inv_two_sq_);
        score_sum += scores[l];
    }

    double max_arg = -std::numeric_limits<double>::infinity();
    thread_local std::vector<double> args;
    args.resize(label_count);
    for (int l = 0; l < label_count; ++l) {
        args[l] = obj.dirichlet[l] + std::log(scores[l] / score_sum);
        max_arg = std::max(max_arg, args[l]);
    }
    if (!std::isfinite(max_arg))
        return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (int l = 0; l < label_count; ++l)
        acc += std::exp(args[l] - max_arg);
    return max_arg + std::log(acc);
}

double LikelihoodContext::log_likelihood(const Pose2D& robot_pose) const {
    const auto& kset = kernels::active();
    const kernels::Se2 se2 = kernels::make_se2(robot_pose);

    double sum = 0.0;
    if (mode_ == LikelihoodMode::slfm) {
        for (const auto& g : groups_) {
            if (!g.ex.empty())
                sum += kset.lfm_log_likelihood(g.field, se2, g.ex.data(), g.ey.data(),
                                               g.addend.data(), static_cast<int>(g.ex.size()),
                                               zhit_norm_, inv_two_sigma_sq_);
        }
        sum += constant_log_;
        return sum;
    }

    sum = kset.lfm_log_likelihood(occupancy_, se2, ex_.data(), ey_.data(), addend_.data(),
                                  static_cast<int>(ex_.size()), zhit_norm_, inv_two_sigma_sq_);
    if (mode_ == LikelihoodMode::slamer) {
        for (size_t k = 0; k < objects_.size(); ++k)
            sum += object_log_term(se2, k);
    }
    return sum;
}

double particle_log_likelihood(const SemanticGridMap& map, const Pose2D& robot_pose,
                               const Scan& scan, const RecognitionFrame& frame,
                               const Hyperparameters& hyper, LikelihoodMode mode) {
    const LikelihoodContext ctx(map, scan, frame, hyper, mode);
    return ctx.log_likelihood(robot_pose);
}

}  // namespace semloc
