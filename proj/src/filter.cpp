#include "semloc/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace semloc {

ParticleFilter::ParticleFilter(const SemanticGridMap& map, const FilterConfig& config,
                               const Pose2D& pose0, uint64_t seed)
    : map_(map), config_(config), rng_(seed) {
    if (config_.particle_count < 2)
        throw std::invalid_argument("particle count must be at least 2");
    config_.hyper.validate();
    config_.motion_noise.validate();

    particles_.resize(config_.particle_count);
    std::normal_distribution<double> unit;
    const double w0 = -std::log(static_cast<double>(config_.particle_count));
    for (auto& p : particles_) {
        const double dx = config_.spread_x > 0.0 ? config_.spread_x * unit(rng_) : 0.0;
        const double dy = config_.spread_y > 0.0 ? config_.spread_y * unit(rng_) : 0.0;
        const double dth = config_.spread_theta > 0.0 ? config_.spread_theta * unit(rng_) : 0.0;
        p.pose = Pose2D(pose0.x + dx, pose0.y + dy, pose0.theta + dth);
        p.log_weight = w0;
    }
}

void ParticleFilter::predict(const ControlInput& u) {
    predict(u, config_.motion_noise);
}

void ParticleFilter::predict(const ControlInput& u, const ControlNoise& noise) {
    for (auto& p : particles_)
        p.pose = sample_motion(p.pose, u, noise, rng_);
}

void ParticleFilter::normalize() {
    double max_lw = -std::numeric_limits<double>::infinity();
    max_likelihood_index_ = 0;
    for (size_t i = 0; i < particles_.size(); ++i) {
        if (particles_[i].log_weight > max_lw) {
            max_lw = particles_[i].log_weight;
            max_likelihood_index_ = static_cast<int>(i);
        }
    }
    if (!std::isfinite(max_lw))
        throw std::runtime_error("all particle likelihoods vanished; cannot normalize weights");
    double sum = 0.0;
    for (auto& p : particles_)
        sum += std::exp(p.log_weight - max_lw);
    const double log_sum = max_lw + std::log(sum);
    for (auto& p : particles_)
        p.log_weight -= log_sum;
}

void ParticleFilter::weight(const Scan& scan, const RecognitionFrame& frame) {
    const LikelihoodContext ctx(map_, scan, frame, config_.hyper, config_.mode);
    for (auto& p : particles_)
        p.log_weight += ctx.log_likelihood(p.pose);
    normalize();
}

std::vector<ObjectPosterior> ParticleFilter::update_recognition(
    const RecognitionFrame& frame) const {
    std::vector<ObjectPosterior> out;
    if (frame.objects.empty())
        return out;
    const Pose2D& ml_pose = particles_[max_likelihood_index_].pose;
    const int label_count = map_.classes().size();
    out.reserve(frame.objects.size());
    for (size_t k = 0; k < frame.objects.size(); ++k) {
        const auto& obj = frame.objects[k];
        const ClassPrior prior = class_prior(map_, ml_pose, obj, config_.hyper);
        ObjectPosterior post;
        post.object_index = static_cast<int>(k);
        post.p.resize(label_count);
        double sum = 0.0;
        for (LabelId l = 0; l < label_count; ++l) {
            post.p[l] =
                dirichlet_recognition_likelihood(obj.probs, l, label_count, config_.hyper) *
                prior.p[l];
            sum += post.p[l];
        }
        for (double& v : post.p)
            v /= sum;
        int best = 0;
        for (int l = 1; l < label_count; ++l)
            if (post.p[l] > post.p[best])
                best = l;
        post.map_label = static_cast<LabelId>(best);
        out.push_back(std::move(post));
    }
    return out;
}

Pose2D ParticleFilter::estimate() const {
    double x = 0.0, y = 0.0, sin_sum = 0.0, cos_sum = 0.0, total = 0.0;
    for (const auto& p : particles_) {
        const double w = std::exp(p.log_weight);
        x += w * p.pose.x;
        y += w * p.pose.y;
        sin_sum += w * std::sin(p.pose.theta);
        cos_sum += w * std::cos(p.pose.theta);
        total += w;
    }
    if (total <= 0.0)
        throw std::runtime_error("degenerate particle weights in estimate");
    return Pose2D(x / total, y / total, std::atan2(sin_sum, cos_sum));
}

double ParticleFilter::ess() const {
    double sum_sq = 0.0;
    for (const auto& p : particles_) {
        const double w = std::exp(p.log_weight);
        sum_sq += w * w;
    }
    return 1.0 / sum_sq;
}

std::vector<int> systematic_resample_indices(const std::vector<double>& weights, int n,
                                             Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u0 = unif(rng);
    std::vector<int> picks(n);
    double cumulative = weights.empty() ? 0.0 : weights[0];
    int j = 0;
    const int m = static_cast<int>(weights.size());
    for (int i = 0; i < n; ++i) {
        const double u = (i + u0) / n;
        while (u > cumulative && j + 1 < m) {
            ++j;
            cumulative += weights[j];
        }
        picks[i] = j;
    }
    return picks;
}

bool ParticleFilter::resample_if_needed() {
    const int n = particle_count();
    if (ess() >= n / 2.0)
        return false;
    std::vector<double> weights(n);
    for (int i = 0; i < n; ++i)
        weights[i] = std::exp(particles_[i].log_weight);
    const auto picks = systematic_resample_indices(weights, n, rng_);
    std::vector<Particle> next(n);
    const double w0 = -std::log(static_cast<double>(n));
    for (int i = 0; i < n; ++i) {
        next[i].pose = particles_[picks[i]].pose;
        next[i].log_weight = w0;
    }
    particles_ = std::move(next);
    max_likelihood_index_ = 0;
    return true;
}

StepResult ParticleFilter::step(const ControlInput& u, const Scan& scan,
                                const RecognitionFrame& frame) {
    predict(u);
    weight(scan, frame);
    StepResult result;
    result.posteriors = update_recognition(frame);
    result.estimate = estimate();
    result.ess = ess();
    result.resampled = resample_if_needed();
    ++step_counter_;
    return result;
}

StepResult ParticleFilter::step(const ControlInput& u) {
    predict(u);
    StepResult result;
    result.estimate = estimate();
    result.ess = ess();
    result.resampled = false;
    ++step_counter_;
    return result;
}

}  // namespace semloc
