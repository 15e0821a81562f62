#include <doctest.h>

#include <filesystem>

#include "io.hpp"

using namespace rlx2;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Mlp random_net(std::uint64_t seed) {
    DetRng rng(seed);
    Mlp net = init_network({3, 5, 2}, {0.4, 0.3}, HeadKind::BoundedSquash, rng);
    net.squash_center = VectorXd::Zero(2);
    net.squash_half = VectorXd::Constant(2, 2.0);
    // Irrational-ish values exercise the 17-digit round-trip.
    for (auto& layer : net.layers) {
        layer.weights *= M_PI;
        layer.project();
        for (int i = 0; i < layer.out_dim; ++i) layer.bias(i) = std::sqrt(2.0) * (i + 1);
    }
    return net;
}

bool nets_identical(const Mlp& a, const Mlp& b) {
    if (a.head != b.head || a.layers.size() != b.layers.size()) return false;
    if (a.head != HeadKind::Identity &&
        (a.squash_center != b.squash_center || a.squash_half != b.squash_half))
        return false;
    for (size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weights != b.layers[l].weights) return false;
        if (a.layers[l].mask != b.layers[l].mask) return false;
        if (a.layers[l].bias != b.layers[l].bias) return false;
        if (a.layers[l].target_sparsity != b.layers[l].target_sparsity) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("checkpoint text round-trips bit-exactly") {
    Checkpoint cp;
    cp.networks.emplace_back("actor", random_net(5));
    cp.networks.emplace_back("critic1", random_net(6));

    const std::string text = checkpoint_to_text(cp);
    const Checkpoint back = checkpoint_from_text(text);
    REQUIRE(back.networks.size() == 2);
    CHECK(back.networks[0].first == "actor");
    CHECK(nets_identical(cp.networks[0].second, back.networks[0].second));
    CHECK(nets_identical(cp.networks[1].second, back.networks[1].second));
    // Idempotent: re-serializing the parse gives the same bytes.
    CHECK(checkpoint_to_text(back) == text);

    SUBCASE("corrupt weight rows are reported with a line number") {
        std::string bad = text;
        const auto pos = bad.find("layer 3 5");
        REQUIRE(pos != std::string::npos);
        const auto row = bad.find('\n', pos) + 1;
        bad.insert(row, "0.1 0.2\n");  // short row
        try {
            checkpoint_from_text(bad);
            FAIL("expected parse error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("line") != std::string::npos);
            CHECK(std::string(e.what()).find("weight row") != std::string::npos);
        }
    }
}

TEST_CASE("mask dumps use the rows-cols header format") {
    MatrixXd m(2, 3);
    m << 1, 0, 1,
         0, 1, 0;
    const std::string text = mask_to_text(m);
    CHECK(text == "2 3\n1 0 1\n0 1 0\n");
    CHECK(mask_from_text(text) == m);

    SUBCASE("row length mismatch names the row") {
        try {
            mask_from_text("2 3\n1 0 1\n0 1\n");
            FAIL("expected parse error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SUBCASE("non-binary entries are rejected") {
        CHECK_THROWS_AS(mask_from_text("1 2\n1 2\n"), std::runtime_error);
    }
}

TEST_CASE("mask dump round-trip through the filesystem") {
    const std::string dir = "io_test_masks";
    const Mlp net = random_net(9);
    write_mask_dump(dir, "actor", net);
    const auto masks = read_mask_dump(dir, "actor", net.layers.size());
    REQUIRE(masks.size() == net.layers.size());
    for (size_t l = 0; l < masks.size(); ++l) CHECK(masks[l] == net.layers[l].mask);
    std::filesystem::remove_all(dir);
}

TEST_CASE("metrics stream starts with the fixed header") {
    CHECK(std::string(kMetricsHeader) ==
          "step,eval_return,buffer_size,policy_distance,drops,actor_active,critic_active,"
          "train_flops_cum");
    MetricsRow row;
    row.step = 500;
    row.eval_return = -1234.5;
    row.buffer_size = 400;
    row.distance_known = false;
    row.drops = 0;
    row.actor_active = 576;
    row.critic_active = 592;
    row.train_flops_cum = 1e9;
    const std::string csv = metrics_to_csv({row});
    CHECK(csv.find(kMetricsHeader) == 0);
    // Unknown distance renders as an empty field.
    CHECK(csv.find("400,,0,") != std::string::npos);
}

TEST_CASE("config resolution layers defaults, file, then flags") {
    SUBCASE("published defaults per algorithm") {
        const TrainConfig td3 = resolve_config({}, {{"profile", "paper"}});
        CHECK(td3.learning_rate == 3e-4);
        CHECK(td3.discount == 0.99);
        CHECK(td3.hidden == std::vector<int>{256, 256});
        CHECK(td3.batch == 256);
        CHECK(td3.warmup == 25000);
        CHECK(td3.tau == 0.005);
        CHECK(td3.zeta0 == 0.5);
        CHECK(td3.mask_update_interval == 10000);
        CHECK(td3.buffer_check_interval == 10000);
        CHECK(td3.distance_threshold == 0.2);
        CHECK(td3.multi_step_delay == 300000);
        CHECK(td3.actor_interval == 2);
        CHECK(td3.n_step == 3);
        CHECK(td3.distance_batch == 8 * 256);

        const TrainConfig sac = resolve_config({}, {{"algo", "sac"}, {"profile", "paper"}});
        CHECK(sac.actor_interval == 1);
        CHECK(sac.n_step == 2);
        CHECK(sac.entropy_target_auto);
    }
    SUBCASE("desk profile scales step-like quantities by 1/20") {
        const TrainConfig cfg = resolve_config({}, {});
        CHECK(cfg.profile == Profile::Desk);
        CHECK(cfg.warmup == 1250);
        CHECK(cfg.mask_update_interval == 500);
        CHECK(cfg.buffer_check_interval == 500);
        CHECK(cfg.multi_step_delay == 15000);
        CHECK(cfg.eval_interval == 250);
        CHECK(cfg.buffer_min == 2500);
        CHECK(cfg.buffer_max == 50000);
    }
    SUBCASE("flags override file entries, file overrides defaults") {
        const auto file = parse_config_text("lr=0.001\nbatch=64 # inline comment\n");
        const TrainConfig a = resolve_config(file, {});
        CHECK(a.learning_rate == 0.001);
        CHECK(a.batch == 64);
        const TrainConfig b = resolve_config(file, {{"lr", "0.01"}});
        CHECK(b.learning_rate == 0.01);
        CHECK(b.batch == 64);
    }
    SUBCASE("unknown keys and malformed values are usage errors") {
        CHECK_THROWS_AS(resolve_config({{"leraning-rate", "0.1"}}, {}), std::invalid_argument);
        CHECK_THROWS_AS(resolve_config({}, {{"batch", "many"}}), std::invalid_argument);
        CHECK_THROWS_AS(resolve_config({}, {{"algo", "dqn"}}), std::invalid_argument);
        CHECK_THROWS_AS(resolve_config({}, {{"actor-sparsity", "1.0"}}), std::invalid_argument);
        CHECK_THROWS_AS(parse_config_text("lr 0.001\n"), std::invalid_argument);
    }
}

TEST_CASE("a manifest reproduces its configuration exactly") {
    const TrainConfig cfg = resolve_config(
        {}, {{"algo", "sac"}, {"env", "pointmass"}, {"actor-sparsity", "0.9"},
             {"seed", "17"}, {"hidden", "32,16"}});
    const std::string manifest = manifest_text(cfg);
    const TrainConfig back = resolve_config(parse_config_text(manifest), {});
    CHECK(back.fingerprint() == cfg.fingerprint());
    CHECK(back.as_map() == cfg.as_map());

    // Different settings give different fingerprints.
    const TrainConfig other = resolve_config(parse_config_text(manifest), {{"seed", "18"}});
    CHECK(other.fingerprint() != cfg.fingerprint());
}

TEST_CASE("summary json carries score and accounting figures") {
    const TrainConfig cfg = resolve_config({}, {});
    FlopsReport flops;
    flops.actor_size = 123;
    flops.total_size = 999;
    const std::string json = summary_json(cfg, -150.25, flops, {{"critic_updates", 42.0}});
    CHECK(json.find("\"final_score\": -150.25") != std::string::npos);
    CHECK(json.find("\"actor_size\": 123") != std::string::npos);
    CHECK(json.find("\"critic_updates\": 42.0") != std::string::npos);
}
