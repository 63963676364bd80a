#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pin/pin.hpp"

using Catch::Approx;

namespace {

/// Synthetic rows for gradient checks: random inputs, Poisson-ish targets.
pin::Dataset gradient_check_data(const pin::FeatureSchema& schema, std::size_t rows,
                                 std::uint64_t seed) {
    pin::Dataset ds;
    ds.schema = schema;
    pin::Rng rng(seed);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto x = testutil::random_input(schema, rng);
        const double v = rng.uniform(0.25, 1.0);
        const double n = rng.uniform01() < 0.2 ? std::floor(rng.uniform(1.0, 3.0)) : 0.0;
        ds.push_row(x, n / v, v, n);
    }
    return ds;
}

} // namespace

TEST_CASE("gather/scatter round trip over parameter blocks", "[gradients]") {
    const auto schema = testutil::mixed_schema(3, {{2, 4}});
    auto model = testutil::random_model(schema, {2, 3, 2, 4, 3}, 7);
    auto blocks = pin::param_blocks(model.params);
    std::vector<double> flat;
    pin::gather(blocks, flat);
    CHECK(flat.size() == pin::flat_size(blocks));

    auto copy = model;
    auto copy_blocks = pin::param_blocks(copy.params);
    std::vector<double> flat2(flat.size(), 0.0);
    pin::scatter(flat2, copy_blocks);
    pin::gather(copy_blocks, flat2);
    for (double v : flat2) CHECK(v == 0.0);
    pin::scatter(flat, copy_blocks);
    std::vector<double> flat3;
    pin::gather(copy_blocks, flat3);
    CHECK(flat3 == flat);
}

TEST_CASE("analytic gradients match the finite-difference oracle", "[gradients]") {
    const auto schema = testutil::mixed_schema(3, {{2, 4}});
    const pin::HyperParams hp{2, 3, 2, 4, 3};

    // Pick a seed whose parameter point clears every kink, so the central
    // differences stay on one branch for all coordinates.
    pin::PinModel model;
    pin::Dataset data;
    std::vector<std::size_t> rows(16);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::uint64_t seed = 11;
    for (;; ++seed) {
        model = testutil::random_model(schema, hp, seed);
        data = gradient_check_data(schema, 16, seed + 1000);
        if (testutil::kink_clearance_ok(model, data, rows)) break;
        REQUIRE(seed < 100);
    }

    const auto analytic = pin::pin_backward(model, data, rows);
    auto acopy = analytic; // param_blocks needs mutable access
    std::vector<double> aflat;
    pin::gather(pin::param_blocks(acopy), aflat);

    auto loss = testutil::batch_loss_of_params(model, data, rows);
    auto mcopy = model;
    std::vector<double> pflat;
    pin::gather(pin::param_blocks(mcopy.params), pflat);
    const auto fd = pin::finite_difference_gradient(loss, pflat, 1e-5);

    REQUIRE(aflat.size() == fd.size());
    std::size_t ok = 0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
        const double rel = std::fabs(aflat[i] - fd[i]) / std::max(std::fabs(fd[i]), 1e-6);
        if (rel < 1e-4) ++ok;
    }
    CHECK(ok == fd.size());
}

TEST_CASE("saturated units freeze their token and net pathway", "[gradients]") {
    const auto schema = testutil::continuous_schema(2);
    auto model = testutil::random_model(schema, {2, 3, 2, 4, 3}, 21);
    model.params.net.b3 = 50.0; // every logit far above 1: all units saturate at h = 1

    const auto data = gradient_check_data(schema, 8, 22);
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto g = pin::pin_backward(model, data, rows);

    for (double v : g.tokens.entries()) CHECK(v == 0.0);
    for (double v : g.net.w1.entries()) CHECK(v == 0.0);
    for (double v : g.net.w3) CHECK(v == 0.0);
    CHECK(g.net.b3 == 0.0);
    // Output weights still receive dlink * h with h = 1.
    bool any_weight_grad = false;
    for (double v : g.out_weights)
        if (v != 0.0) any_weight_grad = true;
    CHECK(any_weight_grad);
}

TEST_CASE("perfect fit has zero gradient into the output bias", "[gradients]") {
    const auto schema = testutil::continuous_schema(2);
    auto model = pin::init_model(schema, {}, {2, 3, 2, 4, 3}, 31, std::log(0.4));
    // With all output weights zero the prediction is exp(b) = 0.4 everywhere;
    // make every observation equal to it.
    pin::Dataset ds;
    ds.schema = schema;
    pin::Rng rng(32);
    for (int i = 0; i < 20; ++i) {
        const double v = rng.uniform(0.5, 2.0);
        ds.push_row(std::vector<double>{rng.uniform(-1, 1), rng.uniform(-1, 1)}, 0.4, v, 0.4 * v);
    }
    std::vector<std::size_t> rows(ds.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto g = pin::pin_backward(model, ds, rows);
    CHECK(std::fabs(g.bias) < 1e-12);
}

TEST_CASE("inactive pairs receive exactly zero gradient", "[gradients]") {
    const auto schema = testutil::continuous_schema(3);
    auto model = testutil::random_model(schema, {2, 3, 2, 4, 3}, 41);
    pin::set_active_pairs(model, pin::diagonal_mask(3));

    const auto data = gradient_check_data(schema, 12, 42);
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto g = pin::pin_backward(model, data, rows);

    for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t k = j + 1; k < 3; ++k) {
            const std::size_t p = pin::pair_index(j, k, 3);
            CHECK(g.out_weights[p] == 0.0);
            for (double v : g.tokens.row(p)) CHECK(v == 0.0);
        }
    }
    // Diagonal pathway still learns.
    bool any = false;
    for (std::size_t j = 0; j < 3; ++j)
        if (g.out_weights[pin::pair_index(j, j, 3)] != 0.0) any = true;
    CHECK(any);
}

TEST_CASE("categorical embedding gradients touch only levels present in the batch", "[gradients]") {
    const auto schema = testutil::mixed_schema(2, {{1, 6}});
    auto model = testutil::random_model(schema, {2, 3, 2, 4, 3}, 61);
    pin::Dataset ds;
    ds.schema = schema;
    pin::Rng rng(62);
    // Only levels 2 and 5 appear in the batch.
    for (int i = 0; i < 10; ++i)
        ds.push_row(std::vector<double>{rng.uniform(-1, 1), i % 2 == 0 ? 2.0 : 5.0},
                    0.5, 1.0, 0.5);
    std::vector<std::size_t> rows(ds.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto g = pin::pin_backward(model, ds, rows);
    const auto& gcat = std::get<pin::CategoricalEmbedding>(g.embeddings[1]);
    for (std::size_t level = 1; level <= 6; ++level) {
        bool nonzero = false;
        for (double v : gcat.table.row(level - 1))
            if (v != 0.0) nonzero = true;
        if (level == 2 || level == 5)
            CHECK(nonzero);
        else
            CHECK_FALSE(nonzero);
    }
}

TEST_CASE("gradients respect slot-swapped pairs", "[gradients]") {
    // A permuted model must produce the same loss and gradient magnitudes on
    // permuted data as the original does on the original data.
    const auto schema = testutil::continuous_schema(3);
    auto model = testutil::random_model(schema, {2, 3, 2, 4, 3}, 51);
    const std::vector<std::size_t> perm = {2, 0, 1};
    const auto permuted = pin::permute_features(model, perm);

    const auto data = gradient_check_data(schema, 10, 52);
    pin::Dataset pdata;
    pdata.schema = permuted.schema;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const auto px = pin::permute_input(data.row(i), perm);
        pdata.push_row(px, data.y[i], data.v[i], data.n[i]);
    }
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});

    pin::PinParams g1 = pin::clone_zeroed(model.params);
    pin::PinParams g2 = pin::clone_zeroed(permuted.params);
    pin::RowWork w1, w2;
    const double l1 = pin::poisson_batch_grad(model, data, rows, g1, w1);
    const double l2 = pin::poisson_batch_grad(permuted, pdata, rows, g2, w2);
    CHECK(l1 == Approx(l2).epsilon(1e-12));
    CHECK(g1.bias == Approx(g2.bias).epsilon(1e-12));
    // The gradient of a token moves with the pair under the permutation.
    const std::size_t p_old = pin::pair_index(0, 1, 3);
    const std::size_t p_new = pin::pair_index(std::min(perm[0], perm[1]), std::max(perm[0], perm[1]), 3);
    for (std::size_t c = 0; c < model.hp.d0; ++c)
        CHECK(g1.tokens.at(p_old, c) == Approx(g2.tokens.at(p_new, c)).epsilon(1e-10).margin(1e-12));
}
