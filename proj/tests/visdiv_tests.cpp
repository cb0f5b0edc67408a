#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "doctest.h"
#include "oodlab/autoencoder.hpp"
#include "oodlab/errors.hpp"
#include "oodlab/image.hpp"
#include "oodlab/rng.hpp"
#include "test_util.hpp"

using namespace oodlab;

namespace {

AEConfig tiny_config() {
    AEConfig cfg;
    cfg.input_h = 4;
    cfg.input_w = 4;
    cfg.channels = {1, 2};
    cfg.latent_dim = 3;
    cfg.seed = 11;
    return cfg;
}

GrayImage random_image(Rng& rng, std::size_t h, std::size_t w) {
    auto img = make_image(h, w);
    for (auto& p : img.pixels) p = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("config geometry and parameter counts") {
    AEConfig cfg;  // 32x256, channels 1-8-16, latent 64
    cfg.validate();
    CHECK(cfg.stages() == 2);
    CHECK(cfg.feature_h() == 8);
    CHECK(cfg.feature_w() == 64);
    CHECK(cfg.flat_dim() == 16 * 8 * 64);
    // Layer-by-layer hand count: convs 80 + 1168, bottleneck 524352 + 532480,
    // transposed convs 1160 + 73.
    CHECK(AEParams::zeros(cfg).parameter_count() == 1059313);

    auto big = AEConfig::full_scale();
    big.validate();
    CHECK(big.input_h == 64);
    CHECK(big.input_w == 1024);
    CHECK(big.latent_dim == 512);
    CHECK(big.stages() == 4);
    {
        auto zeros = AEParams::zeros(big);
        // Hand count again; about 33.8M parameters.
        CHECK(zeros.parameter_count() == 33781889u);
    }
}

TEST_CASE("config validation rejects impossible geometry") {
    auto bad = tiny_config();
    bad.channels = {3, 2};  // input plane must be single-channel
    CHECK_THROWS_AS(bad.validate(), DataError);

    bad = tiny_config();
    bad.channels = {1, 2, 4};  // two pooling stages need dimensions divisible by 4
    bad.input_h = 6;
    CHECK_THROWS_AS(bad.validate(), DataError);

    bad = tiny_config();
    bad.kernel = 5;
    CHECK_THROWS_AS(bad.validate(), DataError);

    bad = tiny_config();
    bad.pool = 3;
    CHECK_THROWS_AS(bad.validate(), DataError);

    bad = tiny_config();
    bad.latent_dim = 0;
    CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("initialization is seeded, bounded, and bias-free") {
    auto cfg = tiny_config();
    auto p1 = init_autoencoder(cfg);
    auto p2 = init_autoencoder(cfg);
    auto t1 = p1.tensors();
    auto t2 = p2.tensors();
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) CHECK(*t1[i] == *t2[i]);

    cfg.seed = 12;
    auto p3 = init_autoencoder(cfg);
    bool any_diff = false;
    auto t3 = p3.tensors();
    for (std::size_t i = 0; i < t1.size(); ++i) {
        if (*t1[i] != *t3[i]) any_diff = true;
    }
    CHECK(any_diff);

    // Weight bounds follow the fan-in; biases start at zero.
    double bound0 = std::sqrt(6.0 / (1 * 9));  // first conv sees one input plane
    for (double w : p1.enc_convs[0].w) CHECK(std::abs(w) <= bound0);
    for (double b : p1.enc_convs[0].b) CHECK(b == 0.0);
    for (double b : p1.enc_fc.b) CHECK(b == 0.0);
    double bound_fc = std::sqrt(6.0 / p1.config.flat_dim());
    for (double w : p1.enc_fc.w) CHECK(std::abs(w) <= bound_fc);
}

TEST_CASE("forward pass keeps shape and stays inside the sigmoid range") {
    auto cfg = tiny_config();
    auto params = init_autoencoder(cfg);
    Rng rng(3);
    std::vector<GrayImage> batch = {random_image(rng, 4, 4), random_image(rng, 4, 4)};
    auto recon = ae_forward(params, batch);
    REQUIRE(recon.size() == 2);
    for (const auto& img : recon) {
        CHECK(img.height == 4);
        CHECK(img.width == 4);
        for (double p : img.pixels) {
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
    }
    // All-zero parameters push every logit to 0 -> sigmoid gives exactly 0.5.
    auto zero_recon = ae_forward(AEParams::zeros(cfg), batch);
    for (double p : zero_recon[0].pixels) CHECK(p == 0.5);

    auto wrong = make_image(8, 8);
    CHECK_THROWS_AS(ae_forward(params, {wrong}), DataError);
}

TEST_CASE("pairwise loss is the plain pixel mse") {
    auto a = make_image(2, 3, 0.0);
    auto b = make_image(2, 3, 0.5);
    CHECK(ae_loss(a, b) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(ae_loss(a, a) == 0.0);
    auto c = make_image(3, 2);
    CHECK_THROWS_AS(ae_loss(a, c), DataError);
}

TEST_CASE("batch loss equals the mean of per-image reconstruction errors") {
    auto cfg = tiny_config();
    auto params = init_autoencoder(cfg);
    Rng rng(17);
    std::vector<GrayImage> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(random_image(rng, 4, 4));
    auto recon = ae_forward(params, batch);
    double mean = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) mean += ae_loss(recon[i], batch[i]);
    mean /= static_cast<double>(batch.size());
    CHECK(ae_loss(params, batch) == doctest::Approx(mean).epsilon(1e-13));
    CHECK_THROWS_AS(ae_loss(params, {}), DataError);
}

TEST_CASE("single-pixel network matches the hand-derived forward and gradients") {
    // No conv stages: flatten -> dense -> leaky -> dense -> sigmoid on one pixel.
    AEConfig cfg;
    cfg.input_h = 1;
    cfg.input_w = 1;
    cfg.channels = {1};
    cfg.latent_dim = 1;
    cfg.validate();

    auto params = AEParams::zeros(cfg);
    params.enc_fc.w = {0.5};
    params.enc_fc.b = {0.1};
    params.dec_fc.w = {0.7};
    params.dec_fc.b = {-0.2};

    auto img = make_image(1, 1, 0.3);
    auto recon = ae_forward(params, {img});
    REQUIRE(recon.size() == 1);
    // latent = 0.5*0.3 + 0.1 = 0.25; logit = 0.7*0.25 - 0.2 = -0.025.
    CHECK(recon[0].pixels[0] == doctest::Approx(0.49375032550048964).epsilon(1e-15));

    auto bw = ae_backward(params, {img});
    CHECK(bw.loss == doctest::Approx(0.03753918863154569).epsilon(1e-15));
    CHECK(bw.grads.enc_fc.w[0] == doctest::Approx(0.020340605792360637).epsilon(1e-13));
    CHECK(bw.grads.enc_fc.b[0] == doctest::Approx(0.06780201930786879).epsilon(1e-13));
    CHECK(bw.grads.dec_fc.w[0] == doctest::Approx(0.024215006895667426).epsilon(1e-13));
    CHECK(bw.grads.dec_fc.b[0] == doctest::Approx(0.0968600275826697).epsilon(1e-13));
}

TEST_CASE("backpropagation matches central finite differences") {
    auto cfg = tiny_config();
    auto params = init_autoencoder(cfg);
    Rng rng(29);
    std::vector<GrayImage> batch = {random_image(rng, 4, 4), random_image(rng, 4, 4)};

    auto bw = ae_backward(params, batch);
    CHECK(bw.loss == doctest::Approx(ae_loss(params, batch)).epsilon(1e-13));

    auto tensors = params.tensors();
    auto grad_tensors = bw.grads.tensors();
    const double h = 1e-5;
    Rng pick(31);
    int checked = 0;
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        auto& tensor = *tensors[ti];
        // A handful of entries per tensor keeps the test fast while covering
        // every layer kind.
        for (int probe = 0; probe < 3 && !tensor.empty(); ++probe) {
            std::size_t idx = pick.below(tensor.size());
            double saved = tensor[idx];
            tensor[idx] = saved + h;
            double up = ae_loss(params, batch);
            tensor[idx] = saved - h;
            double down = ae_loss(params, batch);
            tensor[idx] = saved;
            double numeric = (up - down) / (2.0 * h);
            double analytic = (*grad_tensors[ti])[idx];
            CHECK(analytic == doctest::Approx(numeric).epsilon(1e-5).scale(1.0));
            ++checked;
        }
    }
    CHECK(checked >= 20);
}

TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
    auto cfg = tiny_config();
    auto params = init_autoencoder(cfg);
    Rng rng(41);
    auto img = random_image(rng, 4, 4);

    auto g1 = ae_backward(params, {img});
    auto g2 = ae_backward(params, {img, img});
    CHECK(g1.loss == doctest::Approx(g2.loss).epsilon(1e-15));
    auto t1 = g1.grads.tensors();
    auto t2 = g2.grads.tensors();
    for (std::size_t i = 0; i < t1.size(); ++i) {
        REQUIRE(t1[i]->size() == t2[i]->size());
        for (std::size_t j = 0; j < t1[i]->size(); ++j) {
            CHECK((*t1[i])[j] == doctest::Approx((*t2[i])[j]).epsilon(1e-13));
        }
    }
}

TEST_CASE("adam first step has the textbook bias-corrected size") {
    std::vector<double> p = {0.0}, g = {2.0}, m = {0.0}, v = {0.0};
    adam_update(p, g, m, v, 1, AdamConfig{});
    CHECK(p[0] == doctest::Approx(-0.000999999995).epsilon(1e-12));

    // Zero gradient moves nothing.
    std::vector<double> p2 = {1.5}, g2 = {0.0}, m2 = {0.0}, v2 = {0.0};
    adam_update(p2, g2, m2, v2, 1, AdamConfig{});
    CHECK(p2[0] == 1.5);
}

TEST_CASE("adam walks a scalar quadratic toward its minimum") {
    std::vector<double> p = {0.0}, m = {0.0}, v = {0.0};
    AdamConfig hp;
    hp.lr = 0.05;
    for (long long t = 1; t <= 500; ++t) {
        std::vector<double> g = {2.0 * (p[0] - 3.0)};
        adam_update(p, g, m, v, t, hp);
    }
    CHECK(std::abs(p[0] - 3.0) < 0.05);
}

TEST_CASE("adam_step rejects non-finite gradients and names the tensor") {
    auto cfg = tiny_config();
    auto params = init_autoencoder(cfg);
    auto state = AdamState::create(cfg);
    auto grads = AEParams::zeros(cfg);

    adam_step(params, grads, state);
    CHECK(state.step == 1);

    // enc_fc.w is the third tensor in declaration order (conv w, conv b, ...).
    grads.enc_fc.w[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(adam_step(params, grads, state), doctest::Contains("tensor 2"),
                         NumericError);
    // The failed call must not advance the step counter.
    CHECK(state.step == 1);
}

TEST_CASE("training is deterministic and snapshots the best validation error") {
    auto cfg = tiny_config();
    Rng rng(55);
    std::vector<GrayImage> train, val;
    for (int i = 0; i < 8; ++i) train.push_back(random_image(rng, 4, 4));
    for (int i = 0; i < 3; ++i) val.push_back(random_image(rng, 4, 4));

    TrainOptions opt;
    opt.epochs = 5;
    opt.batch_size = 4;

    auto r1 = train_autoencoder(cfg, train, val, opt);
    auto r2 = train_autoencoder(cfg, train, val, opt);
    CHECK(r1.best_val_mse == r2.best_val_mse);
    CHECK(r1.best_epoch == r2.best_epoch);
    CHECK(r1.val_history == r2.val_history);
    auto t1 = r1.params.tensors();
    auto t2 = r2.params.tensors();
    for (std::size_t i = 0; i < t1.size(); ++i) CHECK(*t1[i] == *t2[i]);

    REQUIRE(r1.val_history.size() == 5);
    // The snapshot is never worse than any epoch or the initialization.
    auto init_mse = visual_divergence(init_autoencoder(cfg), val);
    CHECK(r1.best_val_mse <= init_mse + 1e-15);
    for (double h : r1.val_history) CHECK(r1.best_val_mse <= h + 1e-15);
    CHECK(visual_divergence(r1.params, val) == doctest::Approx(r1.best_val_mse).epsilon(1e-13));
}

TEST_CASE("zero epochs return the untouched initialization") {
    auto cfg = tiny_config();
    Rng rng(66);
    std::vector<GrayImage> train = {random_image(rng, 4, 4)};
    std::vector<GrayImage> val = {random_image(rng, 4, 4)};
    TrainOptions opt;
    opt.epochs = 0;

    auto result = train_autoencoder(cfg, train, val, opt);
    CHECK(result.best_epoch == 0);
    CHECK(result.val_history.empty());
    auto init = init_autoencoder(cfg);
    auto ta = result.params.tensors();
    auto tb = init.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);
}

TEST_CASE("training on a learnable pattern beats the initialization") {
    auto cfg = tiny_config();
    // Every sample is the same vertical edge; the network only has to encode one image.
    auto pattern = make_image(4, 4, 1.0);
    for (std::size_t r = 0; r < 4; ++r) pattern.at(r, 0) = 0.0;
    std::vector<GrayImage> train(8, pattern), val(2, pattern);

    double init_mse = visual_divergence(init_autoencoder(cfg), val);
    TrainOptions opt;
    opt.epochs = 40;
    opt.batch_size = 4;
    auto result = train_autoencoder(cfg, train, val, opt);
    CHECK(result.best_val_mse < init_mse);
    CHECK(result.best_epoch > 0);
}

TEST_CASE("parameters survive a save/load round trip") {
    testutil::TempDir dir;
    auto cfg = tiny_config();
    auto params = init_autoencoder(cfg);
    auto path = dir / "model.aeparams";
    save_ae_params(params, path);

    auto loaded = load_ae_params(path);
    CHECK(loaded.config.input_h == cfg.input_h);
    CHECK(loaded.config.input_w == cfg.input_w);
    CHECK(loaded.config.channels == cfg.channels);
    CHECK(loaded.config.latent_dim == cfg.latent_dim);
    CHECK(loaded.config.seed == cfg.seed);

    // Values are stored as 32-bit floats, so the first round trip quantizes...
    auto ta = params.tensors();
    auto tb = loaded.tensors();
    REQUIRE(ta.size() == tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        REQUIRE(ta[i]->size() == tb[i]->size());
        for (std::size_t j = 0; j < ta[i]->size(); ++j) {
            CHECK((*tb[i])[j] == doctest::Approx((*ta[i])[j]).epsilon(1e-6));
            CHECK((*tb[i])[j] == static_cast<double>(static_cast<float>((*ta[i])[j])));
        }
    }

    // ...and a second round trip is byte-stable.
    auto path2 = dir / "model2.aeparams";
    save_ae_params(loaded, path2);
    CHECK(testutil::read_file(path) == testutil::read_file(path2));
}

TEST_CASE("corrupt parameter files are rejected") {
    testutil::TempDir dir;
    auto cfg = tiny_config();
    auto params = init_autoencoder(cfg);
    auto path = dir / "model.aeparams";
    save_ae_params(params, path);
    auto bytes = testutil::read_file(path);

    SUBCASE("wrong magic") {
        auto bad = bytes;
        bad[0] = 'X';
        auto bad_path = dir / "magic.aeparams";
        testutil::write_file(bad_path, bad);
        CHECK_THROWS_AS(load_ae_params(bad_path), DataError);
    }
    SUBCASE("trailing garbage") {
        auto bad_path = dir / "trailing.aeparams";
        testutil::write_file(bad_path, bytes + "extra");
        CHECK_THROWS_AS(load_ae_params(bad_path), DataError);
    }
    SUBCASE("truncated") {
        auto bad_path = dir / "short.aeparams";
        testutil::write_file(bad_path, bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_AS(load_ae_params(bad_path), DataError);
    }
    SUBCASE("missing") {
        CHECK_THROWS_AS(load_ae_params(dir / "none.aeparams"), DataError);
    }
}

TEST_CASE("visual divergence is the mean per-image reconstruction error") {
    auto cfg = tiny_config();
    auto params = init_autoencoder(cfg);
    Rng rng(88);
    std::vector<GrayImage> images;
    for (int i = 0; i < 5; ++i) images.push_back(random_image(rng, 4, 4));

    double mean = 0.0;
    for (const auto& img : images) mean += ae_loss(params, {img});
    mean /= 5.0;
    CHECK(visual_divergence(params, images) == doctest::Approx(mean).epsilon(1e-13));

    auto reversed = images;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(visual_divergence(params, reversed) ==
          doctest::Approx(visual_divergence(params, images)).epsilon(1e-12));

    CHECK_THROWS_AS(visual_divergence(params, {}), DataError);
}
