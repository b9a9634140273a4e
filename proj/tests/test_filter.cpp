#include <doctest.h>

#include <cmath>
#include <numeric>

#include "semloc/filter.hpp"
#include "semloc/world_sim.hpp"

using namespace semloc;

namespace {

SemanticGridMap corridor_map() {
    // 10 m x 3 m corridor with an end wall and a fence landmark
    SemanticGridMap map(200, 60, 0.05, Pose2D(),
                        ClassTable::with_labels({"open_door", "close_door", "open_glass_door",
                                                 "close_glass_door", "no_entry_line", "fence"}));
    for (int cx = 0; cx < 200; ++cx) {
        map.set_cell(cx, 0, kLabelOthers, kLabelOthers);
        map.set_cell(cx, 59, kLabelOthers, kLabelOthers);
    }
    for (int cy = 0; cy < 60; ++cy) {
        map.set_cell(0, cy, kLabelOthers, kLabelOthers);
        map.set_cell(199, cy, kLabelOthers, kLabelOthers);
    }
    for (int cy = 1; cy < 13; ++cy)
        map.set_cell(120, cy, 7, 7);  // fence column at x = 6, hugging the wall
    map.build_all_distance_fields(10.0);
    return map;
}

FilterConfig base_config(LikelihoodMode mode = LikelihoodMode::lfm) {
    FilterConfig fc;
    fc.particle_count = 50;
    fc.mode = mode;
    fc.hyper.r_max = 8.0;
    fc.hyper.beam_stride = 4;
    return fc;
}

ScanParams small_fan() {
    ScanParams p;
    p.beam_count = 90;
    p.angle_min = -M_PI * 0.75;
    p.angle_increment = 1.5 * M_PI / 89.0;
    p.r_max = 8.0;
    return p;
}

}  // namespace

TEST_SUITE("filter") {

TEST_CASE("init: zero spread puts every particle at the seed pose") {
    const SemanticGridMap map = corridor_map();
    ParticleFilter pf(map, base_config(), Pose2D(2, 1.5, 0.1), 7);
    for (const auto& p : pf.particles()) {
        CHECK(p.pose.x == 2.0);
        CHECK(p.pose.y == 1.5);
        CHECK(p.pose.theta == doctest::Approx(0.1));
        CHECK(std::exp(p.log_weight) == doctest::Approx(1.0 / 50));
    }
    CHECK_THROWS_AS(ParticleFilter(map, FilterConfig{1}, Pose2D(), 1), std::invalid_argument);
}

TEST_CASE("predict with zero noise and zero control leaves the state unchanged") {
    const SemanticGridMap map = corridor_map();
    ParticleFilter pf(map, base_config(), Pose2D(2, 1.5, 0.0), 7);
    pf.predict(ControlInput{0, 0, 0.1});
    for (const auto& p : pf.particles()) {
        CHECK(p.pose.x == 2.0);
        CHECK(p.pose.y == 1.5);
    }
}

TEST_CASE("predict is seed deterministic and spreads the cloud") {
    const SemanticGridMap map = corridor_map();
    FilterConfig fc = base_config();
    fc.motion_noise = ControlNoise{0.01, 0.0, 0.004};

    ParticleFilter a(map, fc, Pose2D(2, 1.5, 0.0), 7);
    ParticleFilter b(map, fc, Pose2D(2, 1.5, 0.0), 7);
    for (int t = 0; t < 5; ++t) {
        a.predict(ControlInput{0.5, 0.0, 0.1});
        b.predict(ControlInput{0.5, 0.0, 0.1});
    }
    for (int i = 0; i < a.particle_count(); ++i) {
        CHECK(a.particles()[i].pose.x == b.particles()[i].pose.x);
        CHECK(a.particles()[i].pose.theta == b.particles()[i].pose.theta);
    }

    // cloud covariance trace grows under repeated noisy predicts
    FilterConfig grow = fc;
    grow.particle_count = 500;
    ParticleFilter c(map, grow, Pose2D(2, 1.5, 0.0), 11);
    auto trace_of = [&]() {
        double mx = 0, my = 0;
        for (const auto& p : c.particles()) {
            mx += p.pose.x;
            my += p.pose.y;
        }
        mx /= c.particle_count();
        my /= c.particle_count();
        double trace = 0;
        for (const auto& p : c.particles())
            trace += (p.pose.x - mx) * (p.pose.x - mx) + (p.pose.y - my) * (p.pose.y - my);
        return trace / c.particle_count();
    };
    c.predict(ControlInput{0.3, 0.05, 0.1});
    const double first = trace_of();
    std::vector<double> traces{first};
    for (int t = 1; t < 10; ++t) {
        c.predict(ControlInput{0.3, 0.05, 0.1});
        traces.push_back(trace_of());
    }
    CHECK(traces.back() > 3.0 * first);  // strong net growth over ten steps
    // and growth holds between well-separated checkpoints
    CHECK(traces[9] > traces[4]);
    CHECK(traces[4] > traces[0]);
}

TEST_CASE("weight: identical particles end up uniform; on-pose particle wins") {
    const SemanticGridMap map = corridor_map();
    const Pose2D true_pose(3.0, 1.5, 0.0);
    const Scan scan = raycast_scan(map, true_pose, small_fan());

    FilterConfig fc = base_config();
    fc.particle_count = 2;
    ParticleFilter pf(map, fc, true_pose, 3);
    pf.weight(scan, RecognitionFrame{});
    for (const auto& p : pf.particles())
        CHECK(std::exp(p.log_weight) == doctest::Approx(0.5).epsilon(1e-9));

    // the on-pose hypothesis beats a laterally displaced one under lfm
    const double on_pose = particle_log_likelihood(map, true_pose, scan, RecognitionFrame{},
                                                   fc.hyper, LikelihoodMode::lfm);
    const double off_pose =
        particle_log_likelihood(map, Pose2D(3.0, 1.9, 0.0), scan, RecognitionFrame{}, fc.hyper,
                                LikelihoodMode::lfm);
    CHECK(on_pose > off_pose);

    // weights normalize to 1 after every weight() call
    FilterConfig spread = fc;
    spread.spread_x = 0.6;
    spread.spread_y = 0.2;
    ParticleFilter pf3(map, spread, true_pose, 12);
    pf3.weight(scan, RecognitionFrame{});
    double sum = 0.0;
    for (const auto& p : pf3.particles())
        sum += std::exp(p.log_weight);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("update_recognition: symmetric concentrations reduce to the map prior") {
    const SemanticGridMap map = corridor_map();
    const Pose2D pose(4.5, 1.5, 0.0);
    const Scan scan = raycast_scan(map, pose, small_fan());

    FilterConfig fc = base_config(LikelihoodMode::slamer);
    fc.hyper.a1 = fc.hyper.a2 = 2.0;
    ParticleFilter pf(map, fc, pose, 5);

    RecognitionFrame frame;
    ObjectHypothesis obj;
    obj.kind = ObjectKind::physical_line;
    obj.p1 = Point2D{1.52, -1.4};  // on the fence column in the robot frame
    obj.p2 = Point2D{1.52, -0.95};
    obj.member_beams = {0};
    obj.probs = ClassSimplex::one_hot(map.classes().size(), 7);
    frame.objects.push_back(obj);

    pf.weight(scan, frame);
    const auto posteriors = pf.update_recognition(frame);
    REQUIRE(posteriors.size() == 1);
    const Pose2D ml = pf.particles()[pf.max_likelihood_index()].pose;
    const ClassPrior prior = class_prior(map, ml, obj, fc.hyper);
    double sum = 0.0;
    for (int l = 0; l < map.classes().size(); ++l) {
        CHECK(posteriors[0].p[l] == doctest::Approx(prior.p[l]).epsilon(1e-12));
        sum += posteriors[0].p[l];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    // with a1 > a2 and a fence-voting simplex, the posterior argmax is fence
    FilterConfig fc2 = base_config(LikelihoodMode::slamer);
    fc2.hyper.a1 = 1.2;
    fc2.hyper.a2 = 1.0;
    ParticleFilter pf2(map, fc2, pose, 5);
    pf2.weight(scan, frame);
    const auto post2 = pf2.update_recognition(frame);
    CHECK(post2[0].map_label == 7);
    CHECK_MESSAGE(post2[0].p[7] > prior.p[7],
                  "recognition evidence must sharpen the fence posterior");

    // no objects -> empty list
    CHECK(pf.update_recognition(RecognitionFrame{}).empty());
}

TEST_CASE("estimate: dominant particle pose and circular theta mean") {
    const SemanticGridMap map = corridor_map();
    FilterConfig fc = base_config();
    fc.particle_count = 2;
    // identical particles: the estimate is their common pose
    ParticleFilter pf(map, fc, Pose2D(2, 1, 0.4), 1);
    CHECK(pf.estimate().x == doctest::Approx(2.0));
    CHECK(pf.estimate().theta == doctest::Approx(0.4));

    // circular mean around the wrap: +175 and -175 degrees average to 180,
    // never 0
    const double deg = M_PI / 180.0;
    const double s = std::sin(175 * deg) + std::sin(-175 * deg);
    const double c = std::cos(175 * deg) + std::cos(-175 * deg);
    CHECK(std::abs(std::abs(std::atan2(s, c)) - M_PI) < 1e-9);

    // and through the filter itself: a cloud with thetas symmetric about
    // 180deg must estimate theta = 180deg, not 0
    FilterConfig sym = base_config();
    sym.particle_count = 4000;
    sym.spread_theta = 10 * deg;
    ParticleFilter pf2(map, sym, Pose2D(2, 1, M_PI), 6);
    const double est_theta = pf2.estimate().theta;
    CHECK(std::abs(std::abs(est_theta) - M_PI) < 2 * deg);
}

TEST_CASE("estimate equals the naive weighted sum") {
    const SemanticGridMap map = corridor_map();
    FilterConfig fc = base_config();
    fc.particle_count = 40;
    fc.spread_x = 0.3;
    fc.spread_y = 0.2;
    fc.spread_theta = 0.2;
    ParticleFilter pf(map, fc, Pose2D(3, 1.5, 0.3), 17);
    const Scan scan = raycast_scan(map, Pose2D(3, 1.5, 0.3), small_fan());
    pf.weight(scan, RecognitionFrame{});

    const Pose2D est = pf.estimate();
    double x = 0, y = 0;
    for (const auto& p : pf.particles()) {
        x += std::exp(p.log_weight) * p.pose.x;
        y += std::exp(p.log_weight) * p.pose.y;
    }
    CHECK(est.x == doctest::Approx(x).epsilon(1e-12));
    CHECK(est.y == doctest::Approx(y).epsilon(1e-12));
}

TEST_CASE("ess formula") {
    const SemanticGridMap map = corridor_map();
    FilterConfig fc = base_config();
    fc.particle_count = 4;
    ParticleFilter pf(map, fc, Pose2D(2, 1, 0), 1);
    CHECK(pf.ess() == doctest::Approx(4.0).epsilon(1e-12));

    // weights (0.5, 0.25, 0.25) -> 1 / (0.25 + 0.0625 + 0.0625) = 2.666...
    const double ess = 1.0 / (0.5 * 0.5 + 0.25 * 0.25 + 0.25 * 0.25);
    CHECK(ess == doctest::Approx(8.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("systematic resampling multiplicities stay within one of expectation") {
    Rng rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 100);
        std::vector<double> w(n);
        double sum = 0.0;
        for (auto& v : w)
            sum += (v = u(rng) + 1e-6);
        for (auto& v : w)
            v /= sum;
        const auto picks = systematic_resample_indices(w, n, rng);
        std::vector<int> counts(n, 0);
        for (int p : picks)
            counts[p]++;
        for (int i = 0; i < n; ++i)
            CHECK(std::abs(counts[i] - n * w[i]) <= 1.0 + 1e-9);
    }
}

TEST_CASE("resample_if_needed: uniform weights stay put, one-hot collapses") {
    const SemanticGridMap map = corridor_map();
    FilterConfig fc = base_config();
    fc.particle_count = 30;
    fc.spread_x = 0.5;
    ParticleFilter pf(map, fc, Pose2D(3, 1.5, 0), 9);
    CHECK(!pf.resample_if_needed());  // ess == N

    // drive the weights to a near-one-hot distribution with a sharp scan
    const Scan scan = raycast_scan(map, Pose2D(3, 1.5, 0), small_fan());
    FilterConfig sharp = fc;
    sharp.hyper.sigma = 0.03;
    sharp.hyper.z_hit = 0.99;
    sharp.hyper.z_max = 0.005;
    sharp.hyper.z_rand = 0.005;
    ParticleFilter pf2(map, sharp, Pose2D(3, 1.5, 0), 9);
    pf2.weight(scan, RecognitionFrame{});
    if (pf2.ess() < fc.particle_count / 2.0) {
        CHECK(pf2.resample_if_needed());
        for (const auto& p : pf2.particles())
            CHECK(std::exp(p.log_weight) == doctest::Approx(1.0 / 30).epsilon(1e-12));
    }
}

TEST_CASE("step composition equals the manual sequence") {
    const SemanticGridMap map = corridor_map();
    const Pose2D start(3.0, 1.5, 0.0);
    FilterConfig fc = base_config();
    fc.motion_noise = ControlNoise{0.002, 0.0, 0.001};
    const Scan scan = raycast_scan(map, Pose2D(3.05, 1.5, 0.0), small_fan());
    const ControlInput u{0.5, 0.0, 0.1};

    ParticleFilter a(map, fc, start, 31);
    const StepResult res = a.step(u, scan, RecognitionFrame{});

    ParticleFilter b(map, fc, start, 31);
    b.predict(u);
    b.weight(scan, RecognitionFrame{});
    const auto posts = b.update_recognition(RecognitionFrame{});
    const Pose2D est = b.estimate();
    const double ess = b.ess();
    const bool resampled = b.resample_if_needed();

    CHECK(res.estimate.x == est.x);
    CHECK(res.estimate.theta == est.theta);
    CHECK(res.ess == ess);
    CHECK(res.resampled == resampled);
    CHECK(res.posteriors.size() == posts.size());
    CHECK(a.step_counter() == 1);
}

TEST_CASE("rao-blackwellized state stays O(N) poses plus weights") {
    // the particle struct must carry nothing beyond pose and weight
    static_assert(sizeof(Particle) <= sizeof(Pose2D) + sizeof(double));
    CHECK(true);
}

TEST_CASE("noise-free replay tracks truth exactly with measurement disabled") {
    const SemanticGridMap map = corridor_map();
    const ScenarioTruth truth =
        simulate_scenario(map, {Point2D{1.5, 1.5}, Point2D{8.0, 1.5}}, 0.5, 0.1, small_fan());

    FilterConfig fc = base_config();
    fc.particle_count = 10;
    fc.motion_noise = ControlNoise{};  // exact odometry
    ParticleFilter pf(map, fc, truth.poses[0], 2);

    double max_err = 0.0;
    for (int t = 0; t < truth.step_count(); ++t) {
        const StepResult res = pf.step(truth.controls[t]);
        const Pose2D& want = truth.poses[t + 1];
        max_err = std::max({max_err, std::abs(res.estimate.x - want.x),
                            std::abs(res.estimate.y - want.y),
                            std::abs(angle_difference(res.estimate.theta, want.theta))});
    }
    CHECK(max_err < 1e-9);
}

TEST_CASE("mode flag routes to different likelihoods when objects are present") {
    const SemanticGridMap map = corridor_map();
    const Pose2D pose(4.5, 1.5, 0.0);
    const Scan scan = raycast_scan(map, pose, small_fan());

    RecognitionFrame frame;
    ObjectHypothesis obj;
    obj.kind = ObjectKind::physical_line;
    obj.p1 = Point2D{1.52, -1.4};
    obj.p2 = Point2D{1.52, -0.95};
    obj.member_beams = {0};
    obj.probs = ClassSimplex::one_hot(map.classes().size(), 7);
    frame.objects.push_back(obj);

    Hyperparameters h;
    h.r_max = 8.0;
    h.a1 = 1.2;
    h.a2 = 1.0;
    const double lfm = particle_log_likelihood(map, pose, scan, frame, h, LikelihoodMode::lfm);
    const double slamer =
        particle_log_likelihood(map, pose, scan, frame, h, LikelihoodMode::slamer);
    CHECK(lfm != slamer);
}

}  // TEST_SUITE
