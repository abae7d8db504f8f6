#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ffgaf/blocks.hpp"
#include "support/grad_check.hpp"

using namespace ffgaf;
using gradcheck::fill_random;

namespace {

allocation even_alloc(int k, int channels) {
    return allocate(std::vector<double>(k, 0.0), channels, 2.0, alloc_strategy::uniform);
}

training_block<double> make_block(block_kind kind, int c_in, int c_out, int k_classes,
                                  int horizon, rng& gen, int stride = 1) {
    training_block<double> b;
    b.kind = kind;
    b.conv = make_conv_params<double>(c_out, c_in, 3, stride, 1);
    const double sd = std::sqrt(2.0 / (c_in * 9.0));
    for (std::size_t i = 0; i < b.conv.kernels.size(); ++i) b.conv.kernels[i] = gen.normal(0, sd);
    b.norm = make_norm_params<double>(c_out, kind == block_kind::encoding ? norm_mode::batch
                                                                          : norm_mode::temporal);
    b.spiking.horizon = horizon;
    b.quant.levels = horizon;
    b.alloc = even_alloc(k_classes, c_out);
    return b;
}

tensor<double> random_spikes(std::vector<std::size_t> shape, rng& gen, double rate = 0.3) {
    tensor<double> t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = gen.uniform() < rate ? 1.0 : 0.0;
    return t;
}

double block_loss(training_block<double> b, const tensor<double>& x,
                  const std::vector<int>& labels, const net_options& opts) {
    auto fwd = block_forward(b, x, true, opts);
    auto g = goodness(fwd.y, b.alloc, opts.divisor);
    return local_loss(g, labels, opts.loss).loss;
}

} // namespace

TEST_CASE("goodness: zeros floor at epsilon, ones average to one") {
    allocation alloc = even_alloc(2, 4);
    tensor<double> zeros({3, 4, 2, 2});
    auto g0 = goodness(zeros, alloc);
    for (std::size_t i = 0; i < g0.size(); ++i) CHECK(g0[i] == goodness_epsilon);

    allocation one_class = even_alloc(1, 4);
    tensor<double> ones({2, 4, 2, 2}, std::vector<double>(32, 1.0));
    auto g1 = goodness(ones, one_class);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(1.0));
}

TEST_CASE("goodness: direct squaring example {2,3} -> {4,9}") {
    allocation alloc;
    alloc.channels_per_class = {1, 1};
    alloc.total = 2;
    tensor<double> y({1, 2, 1, 1}, {2.0, 3.0});
    auto g = goodness(y, alloc);
    CHECK(g.at(0, 0) == doctest::Approx(4.0));
    CHECK(g.at(0, 1) == doctest::Approx(9.0));
}

TEST_CASE("goodness: temporal divisor includes T unless literal mode") {
    allocation alloc;
    alloc.channels_per_class = {1};
    alloc.total = 1;
    tensor<double> y({2, 1, 1, 1, 1}, {1.0, 1.0}); // T=2, one unit element each step
    auto mean_mode = goodness(y, alloc, eq5_divisor::mean_with_t);
    auto literal = goodness(y, alloc, eq5_divisor::literal);
    CHECK(mean_mode.at(0, 0) == doctest::Approx(1.0)); // (1+1)/(1*1*2)
    CHECK(literal.at(0, 0) == doctest::Approx(2.0));   // (1+1)/(1*1)
}

TEST_CASE("goodness_backward matches finite differences") {
    rng gen(61);
    allocation alloc;
    alloc.channels_per_class = {2, 3};
    alloc.total = 5;
    auto y = fill_random({2, 5, 3, 3}, gen);
    auto g0 = goodness(y, alloc);
    const auto r = gradcheck::projection(g0.size(), 71);
    auto eval = [&]() { return gradcheck::project(goodness(y, alloc), r); };
    tensor<double> grad_g({2, 2});
    for (std::size_t i = 0; i < grad_g.size(); ++i) grad_g[i] = r[i];
    auto grad_y = goodness_backward(y, alloc, grad_g);
    auto ny = gradcheck::numeric_grad(eval, y.data(), y.size());
    CHECK(gradcheck::max_rel_err(
              std::vector<double>(grad_y.data(), grad_y.data() + grad_y.size()), ny) < 1e-4);
}

TEST_CASE("local_loss: literal mode is zero when the true goodness is one") {
    tensor<double> g({2, 2}, {1.0, 0.3, 0.7, 1.0});
    auto r = local_loss(g, {0, 1}, loss_mode::literal);
    CHECK(r.loss == doctest::Approx(0.0));
}

TEST_CASE("local_loss: softmax mode with equal goodness is ln K") {
    tensor<double> g({3, 2}, {0.4, 0.4, 2.0, 2.0, 7.5, 7.5});
    auto r = local_loss(g, {0, 1, 0}, loss_mode::softmax);
    CHECK(r.loss == doctest::Approx(std::log(2.0)));
}

TEST_CASE("local_loss: out-of-range label is an error") {
    tensor<double> g({1, 2}, {1.0, 1.0});
    CHECK_THROWS_AS(local_loss(g, {2}, loss_mode::softmax), data_error);
    CHECK_THROWS_AS(local_loss(g, {-1}, loss_mode::literal), data_error);
}

TEST_CASE("local_loss gradients match finite differences in both modes") {
    rng gen(83);
    tensor<double> g({4, 5});
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = gen.uniform(0.05, 3.0);
    std::vector<int> labels = {1, 0, 4, 2};
    for (auto mode : {loss_mode::softmax, loss_mode::literal}) {
        auto res = local_loss(g, labels, mode);
        auto eval = [&]() { return local_loss(g, labels, mode).loss; };
        auto num = gradcheck::numeric_grad(eval, g.data(), g.size());
        CHECK(gradcheck::max_rel_err(
                  std::vector<double>(res.grad_g.data(), res.grad_g.data() + res.grad_g.size()),
                  num) < 1e-4);
    }
}

TEST_CASE("local_loss: softmax-mode gradient rows sum to zero in ln-G space") {
    rng gen(91);
    tensor<double> g({6, 4});
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = gen.uniform(0.01, 5.0);
    auto res = local_loss(g, {0, 1, 2, 3, 0, 1}, loss_mode::softmax);
    for (std::size_t n = 0; n < 6; ++n) {
        double row = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            row += res.grad_g.at(n, j) * g.at(n, j); // dL/d(ln G) = dL/dG * G
        }
        CHECK(std::abs(row) < 1e-10);
    }
}

TEST_CASE("encoding forward equals the composition of the primitives") {
    rng gen(101);
    auto x = fill_random({3, 2, 6, 6}, gen);
    auto b = make_block(block_kind::encoding, 2, 4, 2, 10, gen);
    auto fwd = block_forward(b, x, true);

    auto b2 = make_block(block_kind::encoding, 2, 4, 2, 10, gen);
    b2.conv = b.conv;
    auto norm_copy = make_norm_params<double>(4, norm_mode::batch);
    auto want = relu(normalize(conv2d(x, b2.conv), norm_copy, true));
    REQUIRE(want.same_shape(fwd.y));
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(fwd.y[i] == want[i]); // bitwise
}

TEST_CASE("encoding forward: zero input, zero bias, zero beta gives zero output") {
    rng gen(103);
    tensor<double> x({2, 1, 5, 5});
    auto b = make_block(block_kind::encoding, 1, 3, 3, 10, gen);
    auto fwd = block_forward(b, x, true);
    for (std::size_t i = 0; i < fwd.y.size(); ++i) CHECK(fwd.y[i] == 0.0);
}

TEST_CASE("forward output is never negative") {
    rng gen(107);
    auto x = fill_random({2, 2, 5, 5}, gen);
    auto b = make_block(block_kind::encoding, 2, 4, 2, 10, gen);
    auto fwd = block_forward(b, x, true);
    for (std::size_t i = 0; i < fwd.y.size(); ++i) CHECK(fwd.y[i] >= 0.0);
}

TEST_CASE("hidden forward equals the explicit loop-over-t oracle") {
    rng gen(109);
    const std::size_t t_steps = 4, n = 2, c_in = 3;
    auto spikes = random_spikes({t_steps, n, c_in, 5, 5}, gen);
    auto b = make_block(block_kind::hidden, c_in, 4, 2, static_cast<int>(t_steps), gen, 2);
    auto fwd = block_forward(b, spikes, true);

    // Oracle: conv each step separately, stack, normalize, sum, relu.
    const std::size_t frame = n * c_in * 25;
    tensor<double> conv_stack;
    for (std::size_t t = 0; t < t_steps; ++t) {
        tensor<double> slice({n, c_in, 5, 5},
                             std::vector<double>(spikes.data() + t * frame,
                                                 spikes.data() + (t + 1) * frame));
        auto out = conv2d(slice, b.conv);
        if (t == 0) {
            conv_stack = tensor<double>({t_steps, n, out.dim(1), out.dim(2), out.dim(3)});
        }
        std::copy(out.data(), out.data() + out.size(),
                  conv_stack.data() + t * out.size());
    }
    auto norm_copy = make_norm_params<double>(4, norm_mode::temporal);
    auto normed = normalize(conv_stack, norm_copy, true);
    const std::size_t out_frame = normed.size() / t_steps;
    tensor<double> summed({n, normed.dim(2), normed.dim(3), normed.dim(4)});
    for (std::size_t t = 0; t < t_steps; ++t) {
        for (std::size_t i = 0; i < out_frame; ++i) summed[i] += normed[t * out_frame + i];
    }
    auto want = relu(summed);

    REQUIRE(want.same_shape(fwd.y));
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(fwd.y[i] == want[i]); // bitwise
    for (std::size_t i = 0; i < normed.size(); ++i) CHECK(fwd.per_step[i] == normed[i]);
}

TEST_CASE("hidden forward with T=1 matches encoding semantics") {
    rng gen(113);
    auto frame = fill_random({2, 3, 4, 4}, gen, 0.0, 1.0);
    tensor<double> train({1, 2, 3, 4, 4}, std::vector<double>(frame.vec()));
    auto hb = make_block(block_kind::hidden, 3, 4, 2, 1, gen);
    auto eb = make_block(block_kind::encoding, 3, 4, 2, 1, gen);
    eb.conv = hb.conv;
    auto hf = block_forward(hb, train, true);
    auto ef = block_forward(eb, frame, true);
    REQUIRE(hf.y.same_shape(ef.y));
    for (std::size_t i = 0; i < hf.y.size(); ++i) {
        CHECK(hf.y[i] == doctest::Approx(ef.y[i]).epsilon(1e-12));
    }
}

TEST_CASE("block_train_step: zero learning rate leaves parameters bitwise unchanged") {
    rng gen(127);
    auto x = fill_random({4, 2, 5, 5}, gen);
    auto b = make_block(block_kind::encoding, 2, 4, 2, 10, gen);
    auto before = b;
    block_train_step(x, {0, 1, 0, 1}, b, 0.0);
    CHECK(b.conv.kernels.vec() == before.conv.kernels.vec());
    CHECK(b.conv.bias == before.conv.bias);
    CHECK(b.conv.channel_weight == before.conv.channel_weight);
    CHECK(b.norm.gamma == before.norm.gamma);
    CHECK(b.norm.beta == before.norm.beta);
}

TEST_CASE("block_train_step strictly decreases loss on separable data") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        rng gen(900 + seed);
        // Two classes with disjoint active quadrants.
        tensor<double> x({8, 1, 4, 4});
        std::vector<int> labels(8);
        for (std::size_t i = 0; i < 8; ++i) {
            labels[i] = static_cast<int>(i % 2);
            for (std::size_t h = 0; h < 4; ++h) {
                for (std::size_t w = 0; w < 4; ++w) {
                    const bool active = labels[i] == 0 ? h < 2 : h >= 2;
                    x.at(i, std::size_t(0), h, w) = active ? gen.uniform(0.7, 1.0)
                                                           : gen.uniform(0.0, 0.1);
                }
            }
        }
        auto b = make_block(block_kind::encoding, 1, 6, 2, 10, gen);
        const double before = block_loss(b, x, labels, {});
        block_train_step(x, labels, b, 0.05);
        const double after = block_loss(b, x, labels, {});
        if (after < before) ++wins;
    }
    CHECK(wins == 20);
}

TEST_CASE("end-to-end block gradient matches finite differences") {
    rng gen(131);
    net_options opts;
    for (auto kind : {block_kind::encoding, block_kind::hidden}) {
        const int t_steps = 3;
        tensor<double> input;
        if (kind == block_kind::encoding) {
            input = fill_random({2, 2, 5, 5}, gen);
        } else {
            input = random_spikes({t_steps, 2, 2, 5, 5}, gen);
        }
        auto b = make_block(kind, 2, 4, 2, t_steps, gen);
        std::vector<int> labels = {0, 1};

        auto fwd = block_forward(b, input, true, opts);
        auto g_mat = goodness(fwd.y, b.alloc, opts.divisor);
        auto loss = local_loss(g_mat, labels, opts.loss);
        auto grads = block_gradients(b, input, fwd, loss.grad_g, opts);

        auto eval = [&]() { return block_loss(b, input, labels, opts); };

        auto nk = gradcheck::numeric_grad(eval, b.conv.kernels.data(), b.conv.kernels.size());
        CHECK(gradcheck::max_rel_err(
                  std::vector<double>(grads.kernels.data(),
                                      grads.kernels.data() + grads.kernels.size()),
                  nk) < 1e-3);
        auto ngamma = gradcheck::numeric_grad(eval, b.norm.gamma.data(), b.norm.gamma.size());
        CHECK(gradcheck::max_rel_err(grads.gamma, ngamma) < 1e-3);
        auto nbeta = gradcheck::numeric_grad(eval, b.norm.beta.data(), b.norm.beta.size());
        CHECK(gradcheck::max_rel_err(grads.beta, nbeta) < 1e-3);
        auto nbias = gradcheck::numeric_grad(eval, b.conv.bias.data(), b.conv.bias.size());
        CHECK(gradcheck::max_rel_err(grads.bias, nbias) < 1e-3);
        auto nw = gradcheck::numeric_grad(eval, b.conv.channel_weight.data(),
                                          b.conv.channel_weight.size());
        CHECK(gradcheck::max_rel_err(grads.channel_weight, nw) < 1e-3);
    }
}

TEST_CASE("allocation-consistency: permuting partition and labels together") {
    rng gen(137);
    auto y = fill_random({3, 5, 2, 2}, gen);
    allocation alloc;
    alloc.channels_per_class = {2, 3};
    alloc.total = 5;
    std::vector<int> labels = {0, 1, 0};
    const double base = local_loss(goodness(y, alloc), labels, loss_mode::softmax).loss;

    // Swap the two classes: move class 1's channels in front, flip labels.
    tensor<double> swapped(y.shape());
    for (std::size_t n = 0; n < 3; ++n) {
        for (std::size_t c = 0; c < 5; ++c) {
            const std::size_t src = c < 3 ? c + 2 : c - 3;
            for (std::size_t s = 0; s < 4; ++s) {
                swapped.at(n, c, s / 2, s % 2) = y.at(n, src, s / 2, s % 2);
            }
        }
    }
    allocation alloc2;
    alloc2.channels_per_class = {3, 2};
    alloc2.total = 5;
    std::vector<int> labels2 = {1, 0, 1};
    const double perm = local_loss(goodness(swapped, alloc2), labels2, loss_mode::softmax).loss;
    CHECK(perm == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("prediction is invariant to a common positive rescale of goodness") {
    rng gen(139);
    tensor<double> g1({5, 3});
    for (std::size_t i = 0; i < g1.size(); ++i) g1[i] = gen.uniform(0.01, 2.0);
    tensor<double> g2 = g1;
    tensor<double> g1s = g1, g2s = g2;
    for (std::size_t i = 0; i < g1.size(); ++i) {
        g1s[i] *= 37.5;
        g2s[i] *= 37.5;
    }
    auto base = predict_from_goodness<double>({g1, g2}, {1.0, 1.0});
    auto scaled = predict_from_goodness<double>({g1s, g2s}, {1.0, 1.0});
    CHECK(base == scaled);
}

TEST_CASE("predict: single block picks the larger goodness; ties go low") {
    tensor<double> g({1, 2}, {1.0, std::exp(1.0)});
    CHECK(predict_from_goodness<double>({g}, {1.0})[0] == 1);
    tensor<double> tie({1, 3}, {2.0, 2.0, 2.0});
    CHECK(predict_from_goodness<double>({tie}, {1.0})[0] == 0);
}

TEST_CASE("predict: zero-weighting all but one block reduces to that block") {
    rng gen(149);
    tensor<double> g1({4, 3}), g2({4, 3});
    for (std::size_t i = 0; i < g1.size(); ++i) {
        g1[i] = gen.uniform(0.01, 2.0);
        g2[i] = gen.uniform(0.01, 2.0);
    }
    auto only2 = predict_from_goodness<double>({g1, g2}, {0.0, 1.0});
    auto alone = predict_from_goodness<double>({g2}, {1.0});
    CHECK(only2 == alone);
}

TEST_CASE("no gradient crosses block boundaries") {
    rng gen(151);
    auto x = fill_random({2, 1, 6, 6}, gen, 0.0, 1.0);
    std::vector<int> labels = {0, 1};
    net_options opts;

    auto block0 = make_block(block_kind::encoding, 1, 4, 2, 3, gen);
    auto block1a = make_block(block_kind::hidden, 4, 6, 2, 3, gen);
    auto block1b = block1a;
    for (std::size_t i = 0; i < block1b.conv.kernels.size(); ++i) {
        block1b.conv.kernels[i] += 0.37; // a very different downstream block
    }

    auto fwd = block_forward(block0, x, true, opts);
    auto loss = local_loss(goodness(fwd.y, block0.alloc, opts.divisor), labels, opts.loss);
    auto g1 = block_gradients(block0, x, fwd, loss.grad_g, opts);
    auto g2 = block_gradients(block0, x, fwd, loss.grad_g, opts);
    (void)block1a;
    (void)block1b; // downstream blocks never enter block 0's gradient path
    CHECK(g1.kernels.vec() == g2.kernels.vec());
    CHECK(g1.gamma == g2.gamma);
}

TEST_CASE("network_forward: deterministic, binary spikes at every stage") {
    rng gen(157);
    net_arch arch;
    arch.input_channels = 1;
    arch.channels = {4, 6};
    arch.strides = {1, 2};
    arch.classes = 2;
    arch.horizon = 4;
    arch.levels = 4;
    auto net = build_network<double>(arch, {1.0, -1.0}, alloc_strategy::complexity_aware, 2.0, 5);
    auto x = fill_random({3, 1, 8, 8}, gen, 0.0, 1.0);

    auto a = network_forward(x, net, false);
    auto b = network_forward(x, net, false);
    CHECK(a.final_spikes.vec() == b.final_spikes.vec());
    for (std::size_t i = 0; i < a.goodness.size(); ++i) {
        CHECK(a.goodness[i].vec() == b.goodness[i].vec());
    }
    for (std::size_t i = 0; i < a.final_spikes.size(); ++i) {
        CHECK((a.final_spikes[i] == 0.0 || a.final_spikes[i] == 1.0));
    }
}

TEST_CASE("degenerate zero-kernel network predicts class 0 everywhere") {
    // Equal per-class channel spans keep the constant goodness bitwise tied,
    // so the argmax exercises the lowest-index tie-break.
    rng gen(163);
    net_arch arch;
    arch.input_channels = 1;
    arch.channels = {4, 4};
    arch.strides = {1, 1};
    arch.classes = 2;
    arch.horizon = 3;
    arch.levels = 3;
    auto net = build_network<double>(arch, {0.5, -0.5}, alloc_strategy::uniform, 2.0, 5);
    for (auto& b : net.blocks) {
        for (std::size_t i = 0; i < b.conv.kernels.size(); ++i) b.conv.kernels[i] = 0.0;
        for (auto& v : b.conv.bias) v = 0.9;
    }
    auto x = fill_random({4, 1, 5, 5}, gen, 0.0, 1.0);
    auto acts = network_forward(x, net, true);
    for (const auto& g : acts.goodness) {
        for (std::size_t n = 0; n < g.dim(0); ++n) {
            for (std::size_t j = 1; j < g.dim(1); ++j) {
                CHECK(g.at(n, j) == doctest::Approx(g.at(n, 0)));
            }
        }
    }
    auto pred = predict(x, net);
    for (int p : pred) CHECK(p == 0);
}

TEST_CASE("fit: zero epochs leaves history empty and parameters untouched") {
    auto train = synthetic_classes<double>(2, 20, 1, 6, 6, 4.0, 3);
    net_arch arch;
    arch.input_channels = 1;
    arch.channels = {4};
    arch.strides = {1};
    arch.classes = 2;
    arch.horizon = 4;
    arch.levels = 4;
    auto net = build_network<double>(arch, {1.0, -1.0}, alloc_strategy::uniform, 2.0, 9);
    auto before = net.blocks[0].conv.kernels.vec();
    fit_config cfg;
    cfg.epochs = 0;
    auto history = fit(train, net, cfg);
    CHECK(history.empty());
    CHECK(net.blocks[0].conv.kernels.vec() == before);
}

TEST_CASE("fit: fixed seed reproduces bit-identical history") {
    auto train = synthetic_classes<double>(2, 40, 1, 6, 6, 4.0, 17);
    net_arch arch;
    arch.input_channels = 1;
    arch.channels = {4, 4};
    arch.strides = {1, 1};
    arch.classes = 2;
    arch.horizon = 3;
    arch.levels = 3;
    fit_config cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 5;

    auto run = [&]() {
        auto net = build_network<double>(arch, {1.0, -1.0}, alloc_strategy::complexity_aware, 2.0,
                                         99);
        return fit(train, net, cfg);
    };
    auto h1 = run();
    auto h2 = run();
    REQUIRE(h1.size() == h2.size());
    for (std::size_t e = 0; e < h1.size(); ++e) {
        CHECK(h1[e].block_loss == h2[e].block_loss);
        CHECK(h1[e].block_acc == h2[e].block_acc);
        CHECK(h1[e].ensemble_acc == h2[e].ensemble_acc);
        CHECK(h1[e].spike_rates == h2[e].spike_rates);
    }
}

TEST_CASE("fit memorizes a tiny separable synthetic set") {
    auto train = synthetic_classes<double>(3, 30, 1, 6, 6, 50.0, 23);
    net_arch arch;
    arch.input_channels = 1;
    arch.channels = {6, 9};
    arch.strides = {1, 1};
    arch.classes = 3;
    arch.horizon = 4;
    arch.levels = 4;
    auto net = build_network<double>(arch, {0.0, 0.0, 0.0}, alloc_strategy::uniform, 2.0, 31);
    fit_config cfg;
    cfg.epochs = 12;
    cfg.batch_size = 15;
    cfg.lr = 0.05;
    cfg.seed = 7;
    fit(train, net, cfg);
    auto pred = predict(train.images, net);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == train.labels[i];
    CHECK(correct == pred.size());
}

TEST_CASE("evaluate rejects an empty test set") {
    dataset<double> empty;
    empty.images = tensor<double>({0, 1, 2, 2});
    net_arch arch;
    arch.input_channels = 1;
    arch.channels = {4};
    arch.strides = {1};
    arch.classes = 2;
    arch.horizon = 2;
    arch.levels = 2;
    auto net = build_network<double>(arch, {1.0, -1.0}, alloc_strategy::uniform, 2.0, 1);
    CHECK_THROWS_AS(evaluate(empty, net), data_error);
}

TEST_CASE("training_block validation catches allocation/norm mismatches") {
    rng gen(179);
    auto b = make_block(block_kind::encoding, 1, 4, 2, 4, gen);
    b.alloc.channels_per_class = {1, 1}; // covers 2 of 4 channels
    tensor<double> x({1, 1, 4, 4});
    CHECK_THROWS_AS(block_forward(b, x, true), config_error);

    auto b2 = make_block(block_kind::encoding, 1, 4, 2, 4, gen);
    b2.norm.mode = norm_mode::temporal;
    CHECK_THROWS_AS(block_forward(b2, x, true), config_error);
}
