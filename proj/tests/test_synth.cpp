#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pin/pin.hpp"

using Catch::Approx;

TEST_CASE("generation is a pure function of the spec", "[synth]") {
    pin::GeneratorSpec spec;
    spec.q = 4;
    spec.rows = 500;
    spec.seed = 77;
    spec.effects = {{pin::EffectForm::Linear, 0.4},
                    {pin::EffectForm::Quadratic, 0.3},
                    {pin::EffectForm::Sine, 0.2},
                    {pin::EffectForm::None, 0.0}};
    spec.interactions = {{0, 1, 0.5, pin::InteractionForm::Product}};

    auto [d1, o1] = pin::generate(spec);
    auto [d2, o2] = pin::generate(spec);
    CHECK(d1.x == d2.x);
    CHECK(d1.n == d2.n);
    CHECK(d1.v == d2.v);
    CHECK(o1.log_rate == o2.log_rate);

    spec.seed = 78;
    auto [d3, o3] = pin::generate(spec);
    CHECK(d3.n != d1.n);
}

TEST_CASE("empirical mean count converges to the flat rate", "[synth]") {
    pin::GeneratorSpec spec;
    spec.q = 2;
    spec.rows = 100000;
    spec.seed = 3;
    spec.intercept = std::log(0.1);
    auto [ds, oracle] = pin::generate(spec);
    CHECK(testutil::mean_of(ds.n) == Approx(0.1).margin(0.01));
    for (double v : ds.v) CHECK(v == 1.0);
}

TEST_CASE("oracle log-rates match the spec formula row by row", "[synth]") {
    pin::GeneratorSpec spec;
    spec.q = 3;
    spec.rows = 200;
    spec.seed = 5;
    spec.intercept = -2.0;
    spec.effects = {{pin::EffectForm::Linear, 0.7},
                    {pin::EffectForm::Quadratic, -0.4},
                    {pin::EffectForm::Sine, 0.25}};
    spec.interactions = {{0, 2, 0.6, pin::InteractionForm::ThresholdedSum}};
    auto [ds, oracle] = pin::generate(spec);
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        const auto x = ds.row(i);
        double expected = -2.0 + 0.7 * x[0] - 0.4 * x[1] * x[1] +
                          0.25 * std::sin(3.14159265358979323846 * x[2]);
        if (x[0] + x[2] > 0.0) expected += 0.6;
        CHECK(oracle.log_rate[i] == Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("additive-only data: additive part deviance equals true deviance", "[synth]") {
    pin::GeneratorSpec spec;
    spec.q = 2;
    spec.rows = 2000;
    spec.seed = 11;
    spec.effects = {{pin::EffectForm::Linear, 0.5}, {pin::EffectForm::Quadratic, 0.4}};
    auto [ds, oracle] = pin::generate(spec);
    CHECK(oracle.additive_part_deviance == oracle.true_deviance);
    CHECK(oracle.true_deviance >= 0.0);
}

TEST_CASE("categorical marginals draw valid levels at the given probabilities", "[synth]") {
    pin::GeneratorSpec spec;
    spec.q = 2;
    spec.rows = 20000;
    spec.seed = 13;
    spec.marginals.resize(2);
    spec.marginals[0].kind = pin::FeatureKind::Categorical;
    spec.marginals[0].probabilities = {0.5, 0.3, 0.2};
    auto [ds, oracle] = pin::generate(spec);
    std::array<double, 3> freq = {0, 0, 0};
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        const double level = ds.row(i)[0];
        REQUIRE(level >= 1.0);
        REQUIRE(level <= 3.0);
        freq[static_cast<std::size_t>(level) - 1] += 1.0;
    }
    CHECK(freq[0] / 20000 == Approx(0.5).margin(0.02));
    CHECK(freq[1] / 20000 == Approx(0.3).margin(0.02));
    CHECK(ds.schema.features[0].kind == pin::FeatureKind::Categorical);
    CHECK(ds.schema.features[0].levels.size() == 3);
}

TEST_CASE("gaussian copula induces the requested dependence", "[synth]") {
    pin::GeneratorSpec spec;
    spec.q = 3;
    spec.rows = 20000;
    spec.seed = 17;
    spec.copula = pin::CorrelatedPair{0, 1, 0.9};
    auto [ds, oracle] = pin::generate(spec);

    auto corr = [&](std::size_t a, std::size_t b) {
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            ma += ds.row(i)[a];
            mb += ds.row(i)[b];
        }
        ma /= static_cast<double>(ds.rows());
        mb /= static_cast<double>(ds.rows());
        double sab = 0, saa = 0, sbb = 0;
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            const double da = ds.row(i)[a] - ma, db = ds.row(i)[b] - mb;
            sab += da * db;
            saa += da * da;
            sbb += db * db;
        }
        return sab / std::sqrt(saa * sbb);
    };
    CHECK(corr(0, 1) > 0.8);
    CHECK(std::fabs(corr(0, 2)) < 0.05);
    // Marginals stay uniform on [-1, 1].
    double mean0 = 0;
    for (std::size_t i = 0; i < ds.rows(); ++i) mean0 += ds.row(i)[0];
    CHECK(mean0 / static_cast<double>(ds.rows()) == Approx(0.0).margin(0.03));
}

TEST_CASE("lognormal exposure and spec validation", "[synth]") {
    pin::GeneratorSpec spec;
    spec.q = 2;
    spec.rows = 5000;
    spec.seed = 19;
    spec.exposure_mu = -0.5;
    spec.exposure_sigma = 0.3;
    auto [ds, oracle] = pin::generate(spec);
    for (double v : ds.v) CHECK(v > 0.0);
    double lm = 0;
    for (double v : ds.v) lm += std::log(v);
    CHECK(lm / static_cast<double>(ds.rows()) == Approx(-0.5).margin(0.02));

    pin::GeneratorSpec bad = spec;
    bad.interactions = {{0, 1, 0.5, pin::InteractionForm::Product},
                        {0, 1, 0.2, pin::InteractionForm::Product}};
    CHECK_THROWS_AS(pin::generate(bad), pin::ContractError);
    pin::GeneratorSpec bad2 = spec;
    bad2.interactions = {{1, 1, 0.5, pin::InteractionForm::Product}};
    CHECK_THROWS_AS(pin::generate(bad2), pin::ContractError);
}

TEST_CASE("generator spec JSON parsing", "[synth]") {
    const auto j = nlohmann::json::parse(R"({
        "q": 3, "rows": 100, "seed": 4, "intercept": -2.3,
        "effects": [{"form":"linear","coefficient":0.5},
                    {"form":"none"},
                    {"form":"sine","coefficient":0.2}],
        "interactions": [{"pair":[1,3],"strength":0.7,"form":"product"}],
        "exposure": {"mu": 0.0, "sigma": 0.1},
        "copula": {"pair":[2,3], "rho": 0.4}
    })");
    const auto spec = pin::generator_spec_from_json(j);
    CHECK(spec.q == 3);
    CHECK(spec.interactions.size() == 1);
    CHECK(spec.interactions[0].j == 0);
    CHECK(spec.interactions[0].k == 2);
    CHECK(spec.copula->a == 1);
    CHECK(spec.copula->b == 2);
    CHECK(spec.exposure_sigma == 0.1);

    CHECK_THROWS_AS(pin::generator_spec_from_json(nlohmann::json::parse(R"({"q":1})")),
                    pin::ContractError);
}
