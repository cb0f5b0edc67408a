#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "oodlab/errors.hpp"
#include "oodlab/ngram.hpp"
#include "oodlab/rng.hpp"

using namespace oodlab;

namespace {

// Independent reference: smoothed KL over the union support, written with a
// different traversal than the library (collect union first, then one pass).
double kl_reference(const NgramModel& p, const NgramModel& q) {
    std::vector<std::string> support;
    for (const auto& [k, _] : p.counts) support.push_back(k);
    for (const auto& [k, _] : q.counts) {
        if (!p.counts.count(k)) support.push_back(k);
    }
    const double u = static_cast<double>(support.size());
    double sum = 0.0;
    for (const auto& k : support) {
        auto cnt = [&k](const NgramModel& m) {
            auto it = m.counts.find(k);
            return it == m.counts.end() ? 0LL : it->second;
        };
        double pj = (cnt(p) + p.alpha) / (p.total + p.alpha * u);
        double qj = (cnt(q) + q.alpha) / (q.total + q.alpha * u);
        sum += pj * std::log(pj / qj);
    }
    return sum;
}

NgramModel weighted_unigram(const std::map<std::string, long long>& counts, double alpha) {
    NgramModel m;
    m.order = 1;
    m.alpha = alpha;
    m.counts = counts;
    m.total = 0;
    for (const auto& [_, c] : counts) m.total += c;
    return m;
}

std::string random_line(Rng& rng, std::size_t len, int alphabet_size) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
        s.push_back(static_cast<char>('a' + rng.below(static_cast<std::uint64_t>(alphabet_size))));
    }
    return s;
}

}  // namespace

TEST_CASE("fit_ngrams counts contiguous substrings per line") {
    auto m = fit_ngrams({"abab", "ba"}, 2);
    CHECK(m.order == 2);
    CHECK(m.total == 4);  // ab, ba, ab from "abab"; ba from "ba"
    CHECK(m.counts.at("ab") == 2);
    CHECK(m.counts.at("ba") == 2);
    CHECK(m.counts.size() == 2);

    // Lines shorter than the order contribute nothing.
    auto m3 = fit_ngrams({"ab", "xyz"}, 3);
    CHECK(m3.total == 1);
    CHECK(m3.counts.at("xyz") == 1);
}

TEST_CASE("fit_ngrams rejects empty corpora and bad orders") {
    CHECK_THROWS_AS(fit_ngrams({}, 1), DataError);
    CHECK_THROWS_AS(fit_ngrams({"abc"}, 0), DataError);
    CHECK_THROWS_AS(fit_ngrams({"abc"}, -2), DataError);
}

TEST_CASE("kl divergence of hand-computed two-symbol distributions") {
    // Unsmoothed (alpha = 0) distributions p = (0.5, 0.5), q = (0.9, 0.1)
    // over the same two unigrams.
    auto p = weighted_unigram({{"a", 5}, {"b", 5}}, 0.0);
    auto q = weighted_unigram({{"a", 9}, {"b", 1}}, 0.0);
    CHECK(kl_divergence(p, q) == doctest::Approx(0.5108256237659907).epsilon(1e-14));
    CHECK(kl_divergence(q, p) == doctest::Approx(0.3680642071684971).epsilon(1e-14));
    // Directional: the two orientations differ.
    CHECK(kl_divergence(p, q) != kl_divergence(q, p));
}

TEST_CASE("kl divergence is zero on identical models and infinite on disjoint unsmoothed support") {
    auto p = weighted_unigram({{"a", 3}, {"b", 1}}, 0.0);
    CHECK(kl_divergence(p, p) == 0.0);

    auto q = weighted_unigram({{"c", 4}}, 0.0);
    CHECK(std::isinf(kl_divergence(p, q)));

    // With smoothing the same pair is finite.
    auto ps = weighted_unigram({{"a", 3}, {"b", 1}}, 1.0);
    auto qs = weighted_unigram({{"c", 4}}, 1.0);
    CHECK(std::isfinite(kl_divergence(ps, qs)));
}

TEST_CASE("kl divergence rejects order mismatch") {
    auto p = fit_ngrams({"abc"}, 1);
    auto q = fit_ngrams({"abc"}, 2);
    CHECK_THROWS_AS(kl_divergence(p, q), DataError);
}

TEST_CASE("kl divergence matches the independent reference on random corpora") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<std::string> ca, cb;
        for (int i = 0; i < 6; ++i) ca.push_back(random_line(rng, 4 + rng.below(12), 5));
        for (int i = 0; i < 6; ++i) cb.push_back(random_line(rng, 4 + rng.below(12), 5));
        int order = 1 + static_cast<int>(rng.below(3));
        auto p = fit_ngrams(ca, order);
        auto q = fit_ngrams(cb, order);
        double got = kl_divergence(p, q);
        double want = kl_reference(p, q);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
        CHECK(got >= -1e-12);  // smoothed KL is nonnegative
    }
}

TEST_CASE("textual divergence of disjoint two-letter corpora is the averaged closed form") {
    // Hand derivation: at order 1 the union support is {a,b,c,d}, smoothed
    // p = (1/3, 1/3, 1/6, 1/6) vs q mirrored, KL = (1/3) ln 2; order 2 gives
    // (1/3) ln 2 again over {ab, cd}; orders 3-5 see no n-grams and add 0.
    // Average over five orders: (2/15) ln 2.
    double d = textual_divergence({"ab"}, {"cd"});
    CHECK(d == doctest::Approx(0.09241962407465938).epsilon(1e-14));
    CHECK(d == doctest::Approx(2.0 / 15.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("textual divergence is zero between identical corpora") {
    std::vector<std::string> corpus = {"the quick brown fox", "jumps over", "the lazy dog"};
    CHECK(textual_divergence(corpus, corpus) == 0.0);
}

TEST_CASE("textual divergence decreases as smoothing grows") {
    std::vector<std::string> a = {"the cat sat", "a cat ran"};
    std::vector<std::string> b = {"dogs bark loudly", "dogs dig"};
    double d01 = textual_divergence(a, b, 5, 0.1);
    double d1 = textual_divergence(a, b, 5, 1.0);
    double d10 = textual_divergence(a, b, 5, 10.0);
    CHECK(d01 == doctest::Approx(2.237699332861124).epsilon(1e-12));
    CHECK(d1 == doctest::Approx(0.3386939907038943).epsilon(1e-12));
    CHECK(d10 == doctest::Approx(0.00895038759103067).epsilon(1e-12));
    CHECK(d01 > d1);
    CHECK(d1 > d10);
}

TEST_CASE("divergence matrix has zero diagonal and matches pairwise calls") {
    std::vector<std::vector<std::string>> corpora = {
        {"aaa bbb", "abab"},
        {"ccc ddd", "cdcd"},
        {"aabb ccdd", "mixed"},
    };
    std::vector<std::string> names = {"one", "two", "three"};
    auto m = divergence_matrix(corpora, names, false);
    REQUIRE(m.names == names);
    REQUIRE(m.values.rows == 3);
    REQUIRE(m.values.cols == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(m.values(i, i) == 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            CHECK(m.values(i, j) ==
                  doctest::Approx(textual_divergence(corpora[i], corpora[j])).epsilon(1e-14));
        }
    }
}

TEST_CASE("normalized divergence matrix maps off-diagonal extremes to 0 and 100") {
    std::vector<std::vector<std::string>> corpora = {
        {"aaaa", "aaab"},
        {"aabb", "abab"},
        {"zzzz", "zyzy"},
    };
    std::vector<std::string> names = {"a", "b", "c"};
    auto raw = divergence_matrix(corpora, names, false);
    auto norm = divergence_matrix(corpora, names, true);

    double mn = 1e300, mx = -1e300;
    std::size_t argmin_i = 0, argmin_j = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            double v = raw.values(i, j);
            if (v < mn) {
                mn = v;
                argmin_i = i;
                argmin_j = j;
            }
            mx = std::max(mx, v);
        }
    }
    REQUIRE(mx > mn);
    CHECK(norm.values(argmin_i, argmin_j) == doctest::Approx(0.0).epsilon(1e-12));

    bool saw_100 = false;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            double v = norm.values(i, j);
            CHECK(v >= -1e-9);
            CHECK(v <= 100.0 + 1e-9);
            if (std::abs(v - 100.0) < 1e-9) saw_100 = true;
            CHECK(norm.values(i, i) == 0.0);
        }
    }
    CHECK(saw_100);

    // The rescaling is monotone: ordering of off-diagonal cells is preserved.
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i != j) pairs.emplace_back(raw.values(i, j), norm.values(i, j));
        }
    }
    for (const auto& [r1, n1] : pairs) {
        for (const auto& [r2, n2] : pairs) {
            if (r1 < r2) CHECK(n1 <= n2 + 1e-9);
        }
    }
}

TEST_CASE("normalize_offdiagonal handles the degenerate all-equal case") {
    NamedMatrix m;
    m.names = {"x", "y"};
    m.values = Matrix(2, 2);
    m.values(0, 1) = 7.5;
    m.values(1, 0) = 7.5;
    normalize_offdiagonal(m);
    CHECK(m.values(0, 1) == 0.0);
    CHECK(m.values(1, 0) == 0.0);
    CHECK(m.values(0, 0) == 0.0);
}
