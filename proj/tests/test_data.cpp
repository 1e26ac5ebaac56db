#include <doctest.h>

#include <filesystem>
#include <functional>
#include <random>

#include "sarma/data.hpp"
#include "sarma/errors.hpp"
#include "sarma/simulate.hpp"
#include "support.hpp"

using namespace sarma;
using sarma::testing::make_series;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("standardize uses the population convention") {
    const TimeSeries s = standardize(make_series("a", {1, 3}));
    CHECK(*s.values[0] == doctest::Approx(-1.0));
    CHECK(*s.values[1] == doctest::Approx(1.0));
    CHECK(s.transform->mean == 2.0);
    CHECK(s.transform->std == 1.0);

    const TimeSeries unit = standardize(make_series("u", {-1, 1}));
    CHECK(*unit.values[0] == -1.0);
    CHECK(unit.transform->mean == 0.0);
    CHECK(unit.transform->std == 1.0);

    CHECK(code_of([] { standardize(make_series("c", {5, 5, 5})); }) == ErrorCode::ConstantSeries);
    TimeSeries one = make_series("o", {5, 0});
    one.values[1].reset();
    CHECK(code_of([&] { standardize(one); }) == ErrorCode::TooShort);
}

TEST_CASE("standardize round trip and missing entries") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(3.0, 40.0);
    TimeSeries s;
    for (int i = 0; i < 200; ++i) s.values.push_back(n(rng));
    s.values[7].reset();
    const TimeSeries z = standardize(s);
    CHECK_FALSE(z.values[7].has_value());
    double sum = 0.0, ss = 0.0;
    int k = 0;
    for (const auto& v : z.values) {
        if (v) {
            sum += *v;
            ss += *v * *v;
            ++k;
        }
    }
    CHECK(sum / k == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ss / k == doctest::Approx(1.0));
    const TimeSeries back = unstandardize(z);
    for (std::size_t t = 0; t < s.size(); ++t) {
        if (s.values[t]) CHECK(std::abs(*back.values[t] - *s.values[t]) <= 1e-12 * std::abs(*s.values[t]) + 1e-12);
    }
}

TEST_CASE("standardize on the training region only") {
    const TimeSeries s = standardize(make_series("a", {1, 3, 100}), 2);
    CHECK(*s.values[2] == doctest::Approx(98.0));
}

TEST_CASE("difference") {
    const TimeSeries d = difference(make_series("a", {1, 4, 9, 16}), 1);
    REQUIRE(d.size() == 3);
    CHECK(*d.values[0] == 3);
    CHECK(*d.values[2] == 7);
    CHECK(d.diff_order == 1);
    CHECK(difference(make_series("a", {1, 4}), 0).values == make_series("a", {1, 4}).values);
    TimeSeries gap = make_series("g", {1, 0, 9});
    gap.values[1].reset();
    const TimeSeries dg = difference(gap, 1);
    CHECK_FALSE(dg.values[0].has_value());
    CHECK_FALSE(dg.values[1].has_value());
    CHECK(code_of([] { difference(make_series("a", {1, 2}), 2); }) == ErrorCode::TooShort);

    const TimeSeries x = make_series("x", {2, 7, 1, 8, 2, 8, 1, 8});
    CHECK(difference(difference(x, 1), 1).values == difference(x, 2).values);
    CHECK(difference(x, 2).diff_order == 2);
}

TEST_CASE("undifference forecasts") {
    const std::vector<Moments> f{{3.0, 0.5}};
    CHECK(undifference_forecast(make_series("b", {10}), f, 0)[0].mean == 3.0);
    CHECK(undifference_forecast(make_series("b", {4, 10}), f, 1)[0].mean == 13.0);
    const std::vector<Moments> f2{{1.0, 0.5}};
    CHECK(undifference_forecast(make_series("b", {8, 10}), f2, 2)[0].mean == 13.0);

    // Multi-step d = 1: cumulative sums of means and of independent variances.
    const std::vector<Moments> h{{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}};
    const auto lv = undifference_forecast(make_series("b", {0, 10}), h, 1);
    CHECK(lv[2].mean == 16.0);
    CHECK(lv[2].variance == 6.0);
    // d = 2: level_k = last + k * last_diff + sum of nested sums.
    const auto l2 = undifference_forecast(make_series("b", {8, 10}), h, 2);
    CHECK(l2[0].mean == 13.0);   // 10 + (2 + 1)
    CHECK(l2[1].mean == 18.0);   // 13 + (2 + 1 + 2)
    CHECK(l2[1].variance == doctest::Approx(4.0 * 1.0 + 1.0 * 2.0));

    TimeSeries miss = make_series("b", {1, 2});
    miss.values[1].reset();
    CHECK(code_of([&] { undifference_forecast(miss, f, 1); }) == ErrorCode::MissingBase);
}

TEST_CASE("make_missing") {
    TimeSeries s;
    s.values.assign(10000, 1.0);
    CHECK(make_missing(s, 0.0, 3).values == s.values);
    const TimeSeries m = make_missing(s, 0.5, 3);
    const double missing = 10000.0 - static_cast<double>(m.observed_count());
    CHECK(std::abs(missing - 5000.0) <= 3.0 * 50.0);
    CHECK(make_missing(s, 0.5, 3).values == m.values);
    CHECK(make_missing(s, 0.5, 4).values != m.values);
    const TimeSeries held = make_missing(s, 0.9, 3, 100);
    for (std::size_t t = 9900; t < 10000; ++t) CHECK(held.values[t].has_value());
    // Masks at a lower rate are nested in masks at a higher rate.
    const TimeSeries lo = make_missing(s, 0.3, 9);
    const TimeSeries hi = make_missing(s, 0.5, 9);
    for (std::size_t t = 0; t < s.size(); ++t) {
        if (!lo.values[t]) CHECK_FALSE(hi.values[t].has_value());
    }
}

TEST_CASE("fill_in") {
    TimeSeries a = make_series("a", {1, 0, 3});
    a.values[1].reset();
    CHECK(*fill_in(a).values[1] == 2.0);
    TimeSeries b = make_series("b", {0, 2, 4});
    b.values[0].reset();
    CHECK(*fill_in(b).values[0] == 0.0);
    TimeSeries c = make_series("c", {1, 2, 0, 0});
    c.values[2].reset();
    c.values[3].reset();
    CHECK(*fill_in(c).values[3] == 4.0);
    const TimeSeries full = make_series("f", {5, 1, 4});
    CHECK(fill_in(full).values == full.values);
    TimeSeries lonely = make_series("l", {1, 0, 0});
    lonely.values[1].reset();
    lonely.values[2].reset();
    CHECK(code_of([&] { fill_in(lonely); }) == ErrorCode::TooShort);

    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    TimeSeries r;
    for (int i = 0; i < 300; ++i) r.values.push_back(n(rng));
    const TimeSeries rm = make_missing(r, 0.4, 2);
    const TimeSeries rf = fill_in(rm);
    CHECK(rf.observed_count() == rf.size());
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (rm.values[t]) CHECK(*rf.values[t] == *rm.values[t]);
    }
}

TEST_CASE("fill_initial_segment only touches the first positions") {
    TimeSeries a = make_series("a", {0, 2, 0, 4, 0});
    a.values[0].reset();
    a.values[2].reset();
    a.values[4].reset();
    const TimeSeries f = fill_initial_segment(a, 1);
    CHECK(*f.values[0] == 1.0);  // line through (1, 2) and (3, 4)
    CHECK_FALSE(f.values[2].has_value());
}

TEST_CASE("collection CSV round trip") {
    Collection c;
    c.add(make_series("alpha", {1.5, -2.25, 1e-300}));
    TimeSeries b = make_series("beta", {0.1, 0.2, 0.3});
    b.values[1].reset();
    c.add(b);
    c.add(make_series("gamma", {3.0, 1.0 / 3.0, -0.0}));
    const std::string text = format_collection_csv(c);
    const Collection back = parse_collection_csv(text);
    CHECK(back.order == c.order);
    for (const auto& id : c.order) CHECK(back.at(id).values == c.at(id).values);

    const auto path = std::filesystem::temp_directory_path() / "sarma_roundtrip.csv";
    write_collection(c, path);
    const Collection disk = read_collection(path);
    for (const auto& id : c.order) CHECK(disk.at(id).values == c.at(id).values);
    std::filesystem::remove(path);
}

TEST_CASE("CSV parse errors carry locations") {
    CHECK(parse_collection_csv("a,b\n1,\n,2\n").at("a").values[1] == std::nullopt);
    try {
        parse_collection_csv("a,b\n1,2\n3\n");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
    try {
        parse_collection_csv("a,b\n1,x\n");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("column 2") != std::string::npos);
    }
    CHECK(code_of([] { read_collection("/nonexistent/file.csv"); }) == ErrorCode::IoError);
}

TEST_CASE("simulate") {
    ModelStructure s;
    Parameters p;
    p.sigma = 0.0;
    p.gamma = 2.0;
    const Collection c = simulate(sarma::testing::single_model(s, p), 100000, 5);
    double ss = 0.0;
    for (const auto& v : c.at("y").values) ss += *v * *v;
    CHECK(std::abs(ss / 100000.0 - 2.0) < 0.1);
    CHECK(simulate(sarma::testing::single_model(s, p), 50, 5).at("y").values ==
          simulate(sarma::testing::single_model(s, p), 50, 5).at("y").values);

    ModelStructure ar;
    ar.p = 1;
    Parameters z;
    z.alpha = {0.5};
    z.gamma = 0.0;
    z.sigma = 0.0;
    const Collection zero = simulate(sarma::testing::single_model(ar, z), 20, 1);
    for (const auto& v : zero.at("y").values) CHECK(*v == 0.0);

    Parameters konst;
    konst.zeta = 2.5;
    konst.alpha = {0.0};
    konst.gamma = 0.0;
    konst.sigma = 0.0;
    const Collection flat = simulate(sarma::testing::single_model(ar, konst), 20, 1);
    for (const auto& v : flat.at("y").values) CHECK(*v == 2.5);
}

TEST_CASE("simulate orders lag-0 cross predictors and detects cycles") {
    ModelStructure sa;
    sa.cross_predictors = {{"b", 0}};
    ModelStructure sb;
    Parameters pa;
    pa.eta = {1.0};
    pa.gamma = 0.0;
    pa.sigma = 0.0;
    Parameters pb;
    pb.sigma = 0.0;
    MultiModel m;
    m.add("a", SeriesModel{sa, pa, std::nullopt, false});
    m.add("b", SeriesModel{sb, pb, std::nullopt, false});
    CHECK(topological_order(m) == std::vector<std::string>{"b", "a"});
    const Collection c = simulate(m, 30, 2);
    CHECK(c.at("a").values == c.at("b").values);

    ModelStructure sb2;
    sb2.cross_predictors = {{"a", 0}};
    Parameters pb2;
    pb2.eta = {0.5};
    MultiModel cyc;
    cyc.add("a", SeriesModel{sa, pa, std::nullopt, false});
    cyc.add("b", SeriesModel{sb2, pb2, std::nullopt, false});
    CHECK(code_of([&] { simulate(cyc, 10, 1); }) == ErrorCode::CyclicCrossPredictors);
}
