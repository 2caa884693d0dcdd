#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "fleetcast/autoencoder.hpp"
#include "fleetcast/rng.hpp"

using namespace fleetcast;

namespace {

JointState random_state(Rng& rng, std::size_t robots) {
    JointState s;
    s.robots.resize(robots);
    for (auto& r : s.robots) {
        r.x = rng.uniform(-45.0, 45.0);
        r.y = rng.uniform(-25.0, 25.0);
        r.theta = rng.uniform(-3.14, 3.14);
        r.v = rng.uniform(0.0, 2.0);
        r.omega = rng.uniform(-1.5, 1.5);
    }
    return s;
}

}  // namespace

TEST_CASE("wrap_angle lands in (-pi, pi]") {
    const double pi = 3.14159265358979323846;
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(pi) == doctest::Approx(pi).epsilon(1e-15));
    CHECK(wrap_angle(-pi) == doctest::Approx(pi).epsilon(1e-15));
    CHECK(wrap_angle(1.5 * pi) == doctest::Approx(-0.5 * pi).epsilon(1e-12));
    CHECK(wrap_angle(-7.0 * pi) == doctest::Approx(pi).epsilon(1e-12));
    for (double a = -20.0; a < 20.0; a += 0.37) {
        const double w = wrap_angle(a);
        CHECK(w > -pi - 1e-15);
        CHECK(w <= pi + 1e-15);
        CHECK(std::abs(std::sin(w) - std::sin(a)) < 1e-12);
        CHECK(std::abs(std::cos(w) - std::cos(a)) < 1e-12);
    }
}

TEST_CASE("pack/unpack round trip recovers the state") {
    Rng rng(77);
    NormScales n;
    for (int trial = 0; trial < 20; ++trial) {
        const JointState s = random_state(rng, 3);
        std::vector<double> ch(kChannelsPerRobot * 3);
        pack_channels(s, n, ch);
        const JointState back = unpack_channels(ch, n);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(back.robots[i].x == doctest::Approx(s.robots[i].x).epsilon(1e-12));
            CHECK(back.robots[i].y == doctest::Approx(s.robots[i].y).epsilon(1e-12));
            CHECK(std::abs(wrap_angle(back.robots[i].theta - s.robots[i].theta)) < 1e-12);
            CHECK(back.robots[i].v == doctest::Approx(s.robots[i].v).epsilon(1e-12));
            CHECK(back.robots[i].omega ==
                  doctest::Approx(s.robots[i].omega).epsilon(1e-12));
        }
    }
}

TEST_CASE("heading decode is scale-invariant and rejects degenerate pairs") {
    NormScales n;
    std::vector<double> ch(6, 0.0);
    ch[2] = 0.0;
    ch[3] = 1.0;
    CHECK(unpack_channels(ch, n).robots[0].theta ==
          doctest::Approx(1.5707963267948966).epsilon(1e-15));

    ch[2] = 0.6;
    ch[3] = -0.8;
    const double theta1 = unpack_channels(ch, n).robots[0].theta;
    ch[2] *= 2.0;
    ch[3] *= 2.0;
    CHECK(unpack_channels(ch, n).robots[0].theta == theta1);

    ch[2] = 0.01;
    ch[3] = 0.01;
    CHECK_THROWS_AS(unpack_channels(ch, n), DegenerateHeadingError);

    std::vector<double> healthy(6, 0.0);
    healthy[2] = 1.0;
    CHECK(heading_norms_in_band(healthy));
    healthy[2] = 0.3;
    CHECK_FALSE(heading_norms_in_band(healthy));
    healthy[2] = 2.5;
    CHECK_FALSE(heading_norms_in_band(healthy));
}

TEST_CASE("encode is deterministic and separates distinct states") {
    const AeSpec spec = AeSpec::make(2, 8, 32);
    ParamStore a, b;
    add_ae_segments(a, spec, 99);
    add_ae_segments(b, spec, 99);
    const auto va = a.all_values();
    const auto vb = b.all_values();
    REQUIRE(va.size() == vb.size());
    CHECK(std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) == 0);

    Rng rng(5);
    const JointState s = random_state(rng, 2);
    const auto z1 = encode(spec, a.values("encoder"), s);
    const auto z2 = encode(spec, a.values("encoder"), s);
    CHECK(std::memcmp(z1.data(), z2.data(), z1.size() * sizeof(double)) == 0);

    std::vector<std::vector<double>> latents;
    for (int i = 0; i < 40; ++i)
        latents.push_back(encode(spec, a.values("encoder"), random_state(rng, 2)));
    for (std::size_t i = 0; i < latents.size(); ++i)
        for (std::size_t j = i + 1; j < latents.size(); ++j) {
            double d = 0.0;
            for (std::size_t k = 0; k < latents[i].size(); ++k)
                d += std::abs(latents[i][k] - latents[j][k]);
            CHECK(d > 1e-9);
        }

    JointState wrong = s;
    wrong.robots.pop_back();
    CHECK_THROWS_AS(encode(spec, a.values("encoder"), wrong), ShapeError);
}

TEST_CASE("pretraining memorizes a small state set and halts on threshold") {
    const AeSpec spec = AeSpec::make(2, 8, 32);
    Rng rng(123);
    Matrix rows(8, spec.channel_dim());
    for (std::size_t i = 0; i < rows.rows; ++i) {
        const JointState s = random_state(rng, 2);
        pack_channels(s, spec.scales, rows.row(i));
    }

    AePretrainConfig cfg;
    cfg.max_epochs = 1500;
    cfg.batch_size = 8;
    cfg.samples_per_epoch = 8;
    cfg.lr_start = 3e-3;
    cfg.lr_end = 1e-5;
    cfg.halt_pos_error_m = 0.02;
    cfg.seed = 7;

    ParamStore store;
    const AePretrainResult r = pretrain_ae(store, spec, rows, rows, cfg);
    CHECK(r.reached_threshold);
    CHECK(r.val_pos_error_m < 0.02);
    CHECK(r.epochs_run < cfg.max_epochs);

    ParamStore store2;
    cfg.seed = 8;
    const AePretrainResult r2 = pretrain_ae(store2, spec, rows, rows, cfg);
    CHECK(r2.reached_threshold);

    // Decoded output must stay stable under tiny latent perturbations.
    std::vector<double> z(spec.latent_dim), ch(spec.channel_dim());
    mlp_forward(spec.encoder, store.values("encoder"), rows.row(0), z);
    const JointState d0 = decode(spec, store.values("decoder"), z);
    z[3] += 1e-6;
    const JointState d1 = decode(spec, store.values("decoder"), z);
    CHECK(std::hypot(d1.robots[0].x - d0.robots[0].x,
                     d1.robots[0].y - d0.robots[0].y) < 1e-2);
    mlp_forward(spec.decoder, store.values("decoder"), z, ch);
    CHECK(heading_norms_in_band(ch));
}

TEST_CASE("pretraining rerun with one seed is bit-reproducible") {
    const AeSpec spec = AeSpec::make(1, 6, 16);
    Rng rng(9);
    Matrix rows(6, spec.channel_dim());
    for (std::size_t i = 0; i < rows.rows; ++i)
        pack_channels(random_state(rng, 1), spec.scales, rows.row(i));

    AePretrainConfig cfg;
    cfg.max_epochs = 40;
    cfg.batch_size = 3;
    cfg.samples_per_epoch = 6;
    cfg.halt_pos_error_m = 1e-12;  // never halts inside the budget
    cfg.seed = 21;

    ParamStore s1, s2;
    pretrain_ae(s1, spec, rows, rows, cfg);
    pretrain_ae(s2, spec, rows, rows, cfg);
    const auto v1 = s1.all_values();
    const auto v2 = s2.all_values();
    REQUIRE(v1.size() == v2.size());
    CHECK(std::memcmp(v1.data(), v2.data(), v1.size() * sizeof(double)) == 0);
}
