#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "adacvar/data.hpp"
#include "adacvar/error.hpp"

using namespace adacvar;

namespace {

Dataset labelled(const std::vector<double>& labels) {
    Dataset d;
    d.rows = labels.size();
    d.cols = 1;
    d.continuous = {true};
    d.feature_names = {"id"};
    d.task = TaskKind::binary;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        d.features.push_back(static_cast<double>(i));
        d.targets.push_back(labels[i]);
    }
    return d;
}

std::size_t count(const Dataset& d, double label) {
    return static_cast<std::size_t>(std::count(d.targets.begin(), d.targets.end(), label));
}

}  // namespace

TEST_CASE("noise-free normal data is exactly linear") {
    SyntheticSpec s;
    s.n = 50;
    s.d = 4;
    s.noise = 0.0;
    s.seed = 3;
    const Dataset a = gen_synthetic(s);
    // Least squares through the normal equations recovers a perfect fit.
    std::vector<double> xtx(16, 0.0), xty(4, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            xty[j] += a.features[i * 4 + j] * a.targets[i];
            for (std::size_t l = 0; l < 4; ++l) xtx[j * 4 + l] += a.features[i * 4 + j] * a.features[i * 4 + l];
        }
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t r = c + 1; r < 4; ++r) {
            const double f = xtx[r * 4 + c] / xtx[c * 4 + c];
            for (std::size_t l = 0; l < 4; ++l) xtx[r * 4 + l] -= f * xtx[c * 4 + l];
            xty[r] -= f * xty[c];
        }
    std::vector<double> theta(4);
    for (std::size_t r = 4; r-- > 0;) {
        double v = xty[r];
        for (std::size_t l = r + 1; l < 4; ++l) v -= xtx[r * 4 + l] * theta[l];
        theta[r] = v / xtx[r * 4 + r];
    }
    double sse = 0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double p = 0;
        for (std::size_t j = 0; j < 4; ++j) p += theta[j] * a.features[i * 4 + j];
        sse += (p - a.targets[i]) * (p - a.targets[i]);
    }
    CHECK(sse <= 1e-18 * a.rows);
}

TEST_CASE("generation is deterministic per seed") {
    for (auto kind : {SyntheticKind::normal, SyntheticKind::pareto, SyntheticKind::sinc, SyntheticKind::two_gaussians}) {
        SyntheticSpec s;
        s.kind = kind;
        s.n = 40;
        s.seed = 9;
        const Dataset a = gen_synthetic(s), b = gen_synthetic(s);
        CHECK(a.features == b.features);
        CHECK(a.targets == b.targets);
        s.seed = 10;
        CHECK(gen_synthetic(s).targets != a.targets);
    }
}

TEST_CASE("pareto noise has mean zero") {
    Rng rng(123);
    double s = 0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) s += pareto_noise(rng);
    CHECK(std::abs(s / n) <= 0.02);
}

TEST_CASE("synthetic shapes and validation") {
    SyntheticSpec s;
    s.kind = SyntheticKind::sinc;
    s.n = 30;
    s.d = 7;
    const Dataset d = gen_synthetic(s);
    CHECK(d.cols == 1);
    for (double x : d.features) CHECK((x >= -5.0 && x <= 5.0));
    s.kind = SyntheticKind::two_gaussians;
    const Dataset g = gen_synthetic(s);
    CHECK(g.task == TaskKind::binary);
    for (double y : g.targets) CHECK((y == -1.0 || y == 1.0));
    s.n = 9;
    CHECK_THROWS_AS(gen_synthetic(s), InvalidInput);
    CHECK(synthetic_from_string("pareto") == SyntheticKind::pareto);
    CHECK_THROWS_AS(synthetic_from_string("mnist"), InvalidInput);
}

TEST_CASE("csv parsing examples") {
    const Dataset three = parse_csv("a,b,y\n1,2,3\n4,5,6\n7,8,9.5\n");
    CHECK(three.rows == 3);
    CHECK(three.cols == 2);
    CHECK(three.targets == std::vector<double>{3, 6, 9.5});
    CHECK(three.task == TaskKind::regression);
    // Two distinct target values read as a binary task.
    CHECK(parse_csv("a,y\n1,3\n2,6\n").task == TaskKind::binary);

    const Dataset cat = parse_csv("x,color,y\n1,red,0.5\n2,green,1.5\n3,blue,2.5\n4,red,3.5\n");
    CHECK(cat.cols == 4);
    CHECK(std::count(cat.continuous.begin(), cat.continuous.end(), false) == 3);
    for (std::size_t i = 0; i < cat.rows; ++i) {
        double s = 0;
        for (std::size_t j = 1; j < 4; ++j) s += cat.features[i * 4 + j];
        CHECK(s == 1.0);
    }

    try {
        parse_csv("a,b\n");
        FAIL("header-only file accepted");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseFailure::empty_dataset);
    }
    try {
        parse_csv("");
        FAIL("empty file accepted");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseFailure::empty_file);
    }
    try {
        parse_csv("a,b,y\n1,2,3\n4,5\n");
        FAIL("ragged row accepted");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseFailure::ragged_row);
        CHECK(e.row() == 3);
    }
    try {
        CsvSchema reg;
        reg.task = TaskKind::regression;
        parse_csv("a,y\n1,2\n2,abc\n3,4\n", reg);
        FAIL("non-numeric target accepted");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseFailure::bad_cell);
    }
}

TEST_CASE("binary targets and schema overrides") {
    const Dataset b = parse_csv("x,label\n1,yes\n2,no\n3,yes\n");
    CHECK(b.task == TaskKind::binary);
    for (double y : b.targets) CHECK((y == -1.0 || y == 1.0));

    CsvSchema schema;
    schema.target = "x";
    schema.categorical = {"label"};
    const Dataset o = parse_csv("x,label\n1,yes\n2,no\n3,yes\n", schema);
    CHECK(o.targets == std::vector<double>{1, 2, 3});
    CHECK(o.cols == 2);

    CsvSchema pos;
    pos.positive_class = "no";
    const Dataset p = parse_csv("x,label\n1,yes\n2,no\n3,yes\n", pos);
    CHECK(p.targets == std::vector<double>{-1, 1, -1});
}

TEST_CASE("csv round trip through a file") {
    SyntheticSpec s;
    s.n = 20;
    s.d = 3;
    const Dataset d = gen_synthetic(s);
    const auto path = std::filesystem::temp_directory_path() / "adacvar_roundtrip.csv";
    write_csv(d, path.string());
    const Dataset r = load_csv(path.string());
    std::filesystem::remove(path);
    REQUIRE(r.rows == d.rows);
    REQUIRE(r.cols == d.cols);
    for (std::size_t i = 0; i < d.features.size(); ++i) CHECK(r.features[i] == d.features[i]);
    for (std::size_t i = 0; i < d.rows; ++i) CHECK(r.targets[i] == d.targets[i]);
    CHECK_THROWS_AS(load_csv("/nonexistent/adacvar.csv"), IoError);
}

TEST_CASE("standardize examples") {
    Dataset train;
    train.rows = 3;
    train.cols = 2;
    train.features = {1, 5, 2, 5, 3, 5};
    train.targets = {0, 0, 0};
    train.continuous = {true, true};
    Dataset test = train;
    test.features = {4, 5, 0, 6, 2, 5};
    Dataset* others[] = {&test};
    const Standardization st = standardize(train, others);
    const double sd = std::sqrt(2.0 / 3.0);
    CHECK(st.mean[0] == 2.0);
    CHECK(st.scale[0] == doctest::Approx(sd).epsilon(1e-15));
    CHECK(st.scale[1] == 1.0);
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 3; ++i) m += train.features[i * 2];
    for (std::size_t i = 0; i < 3; ++i) v += train.features[i * 2] * train.features[i * 2];
    CHECK(std::abs(m / 3) <= 1e-12);
    CHECK(std::abs(v / 3 - 1.0) <= 1e-12);
    for (std::size_t i = 0; i < 3; ++i) CHECK(train.features[i * 2 + 1] == 0.0);
    CHECK(test.features[0] == doctest::Approx(2.0 / sd).epsilon(1e-14));
    CHECK(test.features[3] == 1.0);

    const std::vector<double> once = train.features;
    standardize(train);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(std::abs(train.features[i] - once[i]) <= 1e-12);
}

TEST_CASE("one-hot columns are not standardized") {
    Dataset d = parse_csv("x,c,y\n1,a,0\n5,b,1\n9,a,2\n");
    standardize(d);
    for (std::size_t i = 0; i < d.rows; ++i)
        for (std::size_t j = 0; j < d.cols; ++j)
            if (!d.continuous[j]) CHECK((d.features[i * d.cols + j] == 0.0 || d.features[i * d.cols + j] == 1.0));
}

TEST_CASE("split examples") {
    const Dataset d = labelled(std::vector<double>(100, 1.0));
    SplitSpec spec;
    spec.seed = 4;
    const Splits s = split(d, spec);
    CHECK(s.train.rows == 50);
    CHECK(s.val.rows == 30);
    CHECK(s.test.rows == 20);
    const Splits again = split(d, spec);
    CHECK(again.train.features == s.train.features);
    std::set<double> ids;
    for (const Dataset* part : {&s.train, &s.val, &s.test})
        for (double x : part->features) ids.insert(x);
    CHECK(ids.size() == 100);
    spec.train = 0.7;
    CHECK_THROWS_AS(split(d, spec), InvalidInput);
    CHECK_THROWS_AS(split(labelled({1, 1, 1}), SplitSpec{}), InvalidInput);
}

TEST_CASE("shift examples") {
    std::vector<double> labels;
    for (int i = 0; i < 500; ++i) labels.push_back(i % 2 ? 1.0 : -1.0);
    const Dataset d = labelled(labels);
    Rng rng(5);

    ShiftSpec inv;
    inv.kind = ShiftKind::binary_imbalance_invert;
    inv.ratio = 0.1;
    const Dataset s = apply_shift(d, inv, rng);
    const double pos = static_cast<double>(count(s, 1.0)), neg = static_cast<double>(count(s, -1.0));
    CHECK(std::abs(pos - neg / 9.0) <= 1.0);

    ShiftSpec up = inv;
    up.rebalance = Rebalance::upsample;
    const Dataset u = apply_shift(d, up, rng);
    CHECK(count(u, 1.0) == count(u, -1.0));

    ShiftSpec down = inv;
    down.rebalance = Rebalance::downsample;
    const Dataset dn = apply_shift(d, down, rng);
    CHECK(count(dn, 1.0) == count(dn, -1.0));
    CHECK(dn.rows == 2 * static_cast<std::size_t>(pos));

    ShiftSpec flat;
    flat.kind = ShiftKind::power_law;
    flat.beta = 1.0;
    CHECK(apply_shift(d, flat, rng).rows == d.rows);

    Dataset reg = d;
    reg.task = TaskKind::regression;
    CHECK_THROWS_AS(apply_shift(reg, inv, rng), InvalidInput);
    inv.ratio = 0.7;
    CHECK_THROWS_AS(apply_shift(d, inv, rng), InvalidInput);
}

TEST_CASE("power-law sizes") {
    std::vector<double> labels;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 100; ++i) labels.push_back(c);
    Dataset d = labelled(labels);
    d.task = TaskKind::multiclass;
    ShiftSpec pl;
    pl.kind = ShiftKind::power_law;
    pl.beta = 0.5;
    Rng rng(1);
    const Dataset s = apply_shift(d, pl, rng);
    const auto counts = class_counts(s);
    REQUIRE(counts.size() == 4);
    CHECK(counts[0].second == 100);
    for (std::size_t c = 1; c < 4; ++c)
        CHECK(static_cast<double>(counts[c].second) ==
              doctest::Approx(100.0 * std::pow(c + 1.0, std::log(0.5))).epsilon(0.02));
}

TEST_CASE("property: shifts are deterministic and never fabricate rows") {
    std::vector<double> labels;
    for (int i = 0; i < 300; ++i) labels.push_back(i % 3 ? 1.0 : -1.0);
    const Dataset d = labelled(labels);
    for (auto rebalance : {Rebalance::none, Rebalance::upsample, Rebalance::downsample}) {
        ShiftSpec spec;
        spec.kind = ShiftKind::binary_imbalance_invert;
        spec.rebalance = rebalance;
        Rng a(77), b(77);
        const Dataset x = apply_shift(d, spec, a), y = apply_shift(d, spec, b);
        CHECK(x.features == y.features);
        std::set<double> seen;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const auto id = static_cast<std::size_t>(x.features[i]);
            REQUIRE(id < d.rows);
            CHECK(x.targets[i] == d.targets[id]);
            seen.insert(x.features[i]);
        }
        if (rebalance != Rebalance::upsample) CHECK(seen.size() == x.rows);
    }
}

TEST_CASE("dataset validation") {
    Dataset d = labelled({1, -1});
    CHECK_NOTHROW(d.validate());
    d.features[0] = NAN;
    CHECK_THROWS_AS(d.validate(), InvalidInput);
    Dataset e;
    CHECK_THROWS_AS(e.validate(), InvalidInput);
}
