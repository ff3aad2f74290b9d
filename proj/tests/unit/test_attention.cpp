#include "mask_oracle.hpp"
#include "support.hpp"

#include "tsrisk/attention.hpp"
#include "tsrisk/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tsrisk;
using namespace tsrisk::attention;
using tsrisk::testkit::random_tensor;

namespace {

AttentionParams random_params(Rng& rng, std::size_t heads, std::size_t head_dim)
{
    const std::size_t width = heads * head_dim;
    AttentionParams p;
    p.heads = heads;
    p.head_dim = head_dim;
    for (std::size_t h = 0; h < heads; ++h) {
        p.query_weight.push_back(random_tensor(rng, width, head_dim));
        p.key_weight.push_back(random_tensor(rng, width, head_dim));
        p.value_weight.push_back(random_tensor(rng, width, head_dim));
        p.query_bias.push_back(random_tensor(rng, 1, head_dim));
        p.key_bias.push_back(random_tensor(rng, 1, head_dim));
        p.value_bias.push_back(random_tensor(rng, 1, head_dim));
    }
    p.output_weight = random_tensor(rng, width, width);
    p.output_bias = random_tensor(rng, 1, width);
    return p;
}

} // namespace

TEST(LocalWindowBounds, InteriorPosition)
{
    EXPECT_EQ(local_window_bounds(10, 58, 5), (WindowBounds{8, 13}));
}

TEST(LocalWindowBounds, ClippedAtStart)
{
    EXPECT_EQ(local_window_bounds(0, 58, 5), (WindowBounds{0, 3}));
}

TEST(LocalWindowBounds, ClippedAtEnd)
{
    EXPECT_EQ(local_window_bounds(57, 58, 5), (WindowBounds{55, 58}));
}

TEST(LocalWindowBounds, RejectsBadArguments)
{
    EXPECT_THROW(local_window_bounds(58, 58, 5), UsageError);
    EXPECT_THROW(local_window_bounds(0, 58, 0), UsageError);
}

TEST(LocalWindowBounds, ContainsPosition)
{
    for (std::size_t n = 1; n <= 30; ++n) {
        for (std::size_t w = 1; w <= 12; ++w) {
            for (std::size_t i = 0; i < n; ++i) {
                const WindowBounds b = local_window_bounds(i, n, w);
                EXPECT_LE(b.start, i);
                EXPECT_LT(i, b.end);
                EXPECT_LE(b.end, n);
            }
        }
    }
}

TEST(LocalMask, WindowOfOneIsDiagonal)
{
    const AttentionMask m = build_local_mask(3, 1);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(m.allows(i, j), i == j);
        }
    }
}

TEST(LocalMask, WideWindowIsFull)
{
    for (std::size_t w = 7; w < 12; ++w) {
        EXPECT_EQ(build_local_mask(4, w), build_full_mask(4));
    }
}

TEST(LocalMask, RowTwoOfFive)
{
    const AttentionMask m = build_local_mask(5, 3);
    EXPECT_FALSE(m.allows(2, 0));
    EXPECT_TRUE(m.allows(2, 1));
    EXPECT_TRUE(m.allows(2, 2));
    EXPECT_TRUE(m.allows(2, 3));
    EXPECT_FALSE(m.allows(2, 4));
    EXPECT_EQ(m.allowed_in_row(2), 3u);
}

TEST(LocalMask, MatchesBruteForceEnumeration)
{
    for (std::size_t n = 1; n <= 20; ++n) {
        for (std::size_t w = 1; w <= 9; w += 2) {
            EXPECT_EQ(testkit::compare_local_mask(n, w), "");
        }
    }
}

TEST(LocalMask, EvenWindowsAreSymmetric)
{
    for (std::size_t n = 1; n <= 20; ++n) {
        for (std::size_t w = 2; w <= 10; w += 2) {
            EXPECT_EQ(testkit::compare_local_mask(n, w), "");
        }
    }
}

TEST(LocalMask, DiagonalAlwaysAllowed)
{
    for (std::size_t n = 1; n <= 20; ++n) {
        for (std::size_t w = 1; w <= 9; ++w) {
            const AttentionMask m = build_local_mask(n, w);
            for (std::size_t i = 0; i < n; ++i) {
                EXPECT_TRUE(m.allows(i, i));
            }
            EXPECT_NO_THROW(m.validate());
        }
    }
}

TEST(CausalMask, SingleStep)
{
    const AttentionMask m = build_causal_mask(1);
    EXPECT_TRUE(m.allows(0, 0));
}

TEST(CausalMask, LowerTriangle)
{
    const AttentionMask m = build_causal_mask(3);
    EXPECT_TRUE(m.allows(0, 0));
    EXPECT_FALSE(m.allows(0, 1));
    EXPECT_FALSE(m.allows(0, 2));
    EXPECT_TRUE(m.allows(1, 0));
    EXPECT_TRUE(m.allows(1, 1));
    EXPECT_FALSE(m.allows(1, 2));
    EXPECT_EQ(m.allowed_in_row(2), 3u);
}

TEST(CausalMask, RowCounts)
{
    for (std::size_t n = 1; n <= 60; ++n) {
        EXPECT_EQ(testkit::compare_causal_mask(n), "");
    }
}

TEST(AttentionMaskTest, AllBlockedRowRejected)
{
    AttentionMask m(3, true);
    m.set(1, 0, false);
    m.set(1, 1, false);
    m.set(1, 2, false);
    EXPECT_THROW(m.validate(), UsageError);
}

TEST(AttentionMaskTest, AdditiveForm)
{
    const Tensor a = build_causal_mask(2).additive();
    EXPECT_EQ(a.at(0, 0), 0.0);
    EXPECT_EQ(a.at(0, 1), kBlockedScore);
    EXPECT_EQ(a.at(1, 0), 0.0);
    EXPECT_EQ(a.at(1, 1), 0.0);
}

TEST(ScaledDotProduct, SingletonReturnsValue)
{
    const Tensor q = Tensor::from_rows({{0.3, -2.0}});
    const Tensor k = Tensor::from_rows({{5.0, 1.0}});
    const Tensor v = Tensor::from_rows({{0.25, -7.5, 3.0}});
    const Tensor out = scaled_dot_product_attention(q, k, v, build_full_mask(1));
    EXPECT_TRUE(bitwise_equal(out, v));
}

TEST(ScaledDotProduct, IdenticalKeysAverageValues)
{
    const Tensor q = Tensor::from_rows({{0.4, 1.1}, {-2.0, 0.7}});
    const Tensor k = Tensor::from_rows({{0.9, -0.3}, {0.9, -0.3}});
    const Tensor v = Tensor::from_rows({{1.0, 4.0}, {3.0, -2.0}});
    const Tensor out = scaled_dot_product_attention(q, k, v, build_full_mask(2));
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(out.at(i, 0), 2.0, 1e-15);
        EXPECT_NEAR(out.at(i, 1), 1.0, 1e-15);
    }
}

TEST(ScaledDotProduct, HandComputedMaskedRow)
{
    const Tensor x = Tensor::from_rows({{1.0}, {0.0}, {-1.0}});
    AttentionMask m(3, true);
    m.set(0, 2, false);
    const Tensor out = scaled_dot_product_attention(x, x, x, m);
    const double expected = std::exp(1.0) / (std::exp(1.0) + 1.0);
    EXPECT_NEAR(out.at(0, 0), expected, 1e-15);
    EXPECT_NEAR(out.at(0, 0), 0.7311, 5e-5);
}

TEST(ScaledDotProduct, ShapeMismatch)
{
    Rng rng(3);
    const Tensor q = random_tensor(rng, 4, 2);
    const Tensor k = random_tensor(rng, 4, 3);
    const Tensor v = random_tensor(rng, 4, 2);
    EXPECT_THROW(scaled_dot_product_attention(q, k, v, build_full_mask(4)), ShapeError);
    const Tensor k2 = random_tensor(rng, 4, 2);
    EXPECT_THROW(scaled_dot_product_attention(q, k2, v, build_full_mask(5)), ShapeError);
}

TEST(ScaledDotProduct, AllBlockedRowRejected)
{
    Rng rng(4);
    const Tensor x = random_tensor(rng, 2, 2);
    AttentionMask m(2, true);
    m.set(0, 0, false);
    m.set(0, 1, false);
    EXPECT_THROW(scaled_dot_product_attention(x, x, x, m), UsageError);
}

TEST(ScaledDotProduct, SoftmaxRowsSumToOne)
{
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(20);
        const std::size_t w = 1 + rng.below(9);
        const Tensor q = random_tensor(rng, n, 3, -3.0, 3.0);
        const Tensor k = random_tensor(rng, n, 3, -3.0, 3.0);
        // Values of all ones make each output entry the softmax row sum.
        const Tensor v(Shape{n, 1}, 1.0);
        const Tensor out = scaled_dot_product_attention(q, k, v, build_local_mask(n, w));
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(out.at(i, 0), 1.0, 1e-12);
        }
    }
}

TEST(ScaledDotProduct, WideWindowEqualsFullAttentionBitwise)
{
    Rng rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + rng.below(20);
        const Tensor q = random_tensor(rng, n, 4);
        const Tensor k = random_tensor(rng, n, 4);
        const Tensor v = random_tensor(rng, n, 4);
        const Tensor local = scaled_dot_product_attention(q, k, v, build_local_mask(n, 2 * n));
        const Tensor full = scaled_dot_product_attention(q, k, v, build_full_mask(n));
        EXPECT_TRUE(bitwise_equal(local, full));
    }
}

TEST(MultiHead, SingleIdentityHeadReducesToScaledDotProduct)
{
    Rng rng(7);
    const std::size_t n = 6, width = 3;
    AttentionParams p;
    p.heads = 1;
    p.head_dim = width;
    Tensor eye({width, width});
    for (std::size_t i = 0; i < width; ++i) {
        eye.at(i, i) = 1.0;
    }
    p.query_weight = {eye};
    p.key_weight = {eye};
    p.value_weight = {eye};
    p.query_bias = {Tensor({1, width})};
    p.key_bias = {Tensor({1, width})};
    p.value_bias = {Tensor({1, width})};
    p.output_weight = eye;
    p.output_bias = Tensor({1, width});
    const Tensor x = random_tensor(rng, n, width);
    const AttentionMask m = build_local_mask(n, 3);
    EXPECT_TRUE(bitwise_equal(multi_head_attention(x, p, m), scaled_dot_product_attention(x, x, x, m)));
}

TEST(MultiHead, CaseStudyShape)
{
    Rng rng(8);
    const AttentionParams p = random_params(rng, 5, 5);
    const Tensor x = random_tensor(rng, 58, 25);
    const Tensor out = multi_head_attention(x, p, build_local_mask(58, 5));
    EXPECT_EQ(out.shape(), (Shape{58, 25}));
}

TEST(MultiHead, ShapeMismatch)
{
    Rng rng(9);
    const AttentionParams p = random_params(rng, 2, 3);
    EXPECT_THROW(multi_head_attention(random_tensor(rng, 5, 5), p, build_full_mask(5)), ShapeError);
}

TEST(MultiHead, LocalityUnderPerturbation)
{
    Rng rng(10);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + rng.below(19);
        const std::size_t w = 1 + 2 * rng.below(4);
        const AttentionParams p = random_params(rng, 1 + rng.below(3), 1 + rng.below(3));
        const std::size_t width = p.heads * p.head_dim;
        const AttentionMask m = build_local_mask(n, w);
        const Tensor x = random_tensor(rng, n, width);
        const Tensor base = multi_head_attention(x, p, m);
        const std::size_t j = rng.below(n);
        Tensor changed = x;
        for (double& v : changed.row(j)) {
            v += rng.uniform(-5.0, 5.0);
        }
        const Tensor out = multi_head_attention(changed, p, m);
        for (std::size_t i = 0; i < n; ++i) {
            if (m.allows(i, j)) {
                continue;
            }
            for (std::size_t c = 0; c < width; ++c) {
                EXPECT_NEAR(out.at(i, c), base.at(i, c), 1e-12) << "n=" << n << " w=" << w << " i=" << i << " j=" << j;
            }
        }
    }
}

TEST(MultiHead, MatchesHeadByHeadComposition)
{
    Rng rng(11);
    const std::size_t n = 7, heads = 2, head_dim = 3, width = heads * head_dim;
    const AttentionParams p = random_params(rng, heads, head_dim);
    const Tensor x = random_tensor(rng, n, width);
    const AttentionMask m = build_local_mask(n, 5);

    auto project = [&](const Tensor& w, const Tensor& b) {
        Tensor out({n, head_dim});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < head_dim; ++c) {
                double acc = b.at(0, c);
                for (std::size_t k = 0; k < width; ++k) {
                    acc += x.at(i, k) * w.at(k, c);
                }
                out.at(i, c) = acc;
            }
        }
        return out;
    };
    Tensor joined({n, width});
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor head = scaled_dot_product_attention(project(p.query_weight[h], p.query_bias[h]),
                                                         project(p.key_weight[h], p.key_bias[h]),
                                                         project(p.value_weight[h], p.value_bias[h]), m);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < head_dim; ++c) {
                joined.at(i, h * head_dim + c) = head.at(i, c);
            }
        }
    }
    Tensor expected({n, width});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < width; ++c) {
            double acc = p.output_bias.at(0, c);
            for (std::size_t k = 0; k < width; ++k) {
                acc += joined.at(i, k) * p.output_weight.at(k, c);
            }
            expected.at(i, c) = acc;
        }
    }
    EXPECT_LT(max_abs_diff(multi_head_attention(x, p, m), expected), 1e-13);
}
