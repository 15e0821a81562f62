#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <rlx2.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

struct Config {
    rlx2_config* ptr = rlx2_config_new();
    ~Config() { rlx2_config_free(ptr); }
    int set(const char* k, const char* v) { return rlx2_config_set(ptr, k, v); }
};

void collect_line(const char* line, void* user) {
    static_cast<std::vector<std::string>*>(user)->push_back(line);
}

Config tiny_run_config() {
    Config cfg;
    cfg.set("env", "pendulum");
    cfg.set("steps", "600");
    cfg.set("warmup", "100");
    cfg.set("hidden", "8,8");
    cfg.set("batch", "8");
    cfg.set("buffer-min", "50");
    cfg.set("buffer-max", "400");
    cfg.set("buffer-check-interval", "200");
    cfg.set("mask-update-interval", "100");
    cfg.set("multi-step-delay", "200");
    cfg.set("eval-interval", "200");
    cfg.set("eval-episodes", "1");
    cfg.set("distance-batch", "8");
    cfg.set("actor-sparsity", "0.5");
    cfg.set("critic-sparsity", "0.5");
    return cfg;
}

}  // namespace

TEST_CASE("config handles validate keys and values") {
    Config cfg;
    CHECK(cfg.set("algo", "sac") == RLX2_OK);
    CHECK(cfg.set("algo", "dqn") == RLX2_ERR_USAGE);
    CHECK(std::string(rlx2_last_error()).find("algo") != std::string::npos);
    CHECK(cfg.set("not-a-key", "1") == RLX2_ERR_USAGE);
    // The failed sets did not stick.
    char buf[64];
    REQUIRE(rlx2_config_get(cfg.ptr, "algo", buf, sizeof buf) == RLX2_OK);
    CHECK(std::string(buf) == "sac");
    CHECK(rlx2_config_validate(cfg.ptr) == RLX2_OK);

    // SAC defaults resolved through the C surface.
    REQUIRE(rlx2_config_get(cfg.ptr, "n-step", buf, sizeof buf) == RLX2_OK);
    CHECK(std::string(buf) == "2");

    CHECK(rlx2_config_fingerprint(cfg.ptr) != 0);
    const uint64_t fp = rlx2_config_fingerprint(cfg.ptr);
    CHECK(cfg.set("seed", "9") == RLX2_OK);
    CHECK(rlx2_config_fingerprint(cfg.ptr) != fp);
}

TEST_CASE("config files load through the C surface") {
    const char* path = "capi_test_config.txt";
    {
        std::ofstream out(path);
        out << "# comment\nlr=0.001\nenv=pointmass\n";
    }
    Config cfg;
    CHECK(rlx2_config_load_file(cfg.ptr, path) == RLX2_OK);
    char buf[64];
    REQUIRE(rlx2_config_get(cfg.ptr, "env", buf, sizeof buf) == RLX2_OK);
    CHECK(std::string(buf) == "pointmass");
    // Direct sets override the file layer.
    CHECK(cfg.set("env", "pendulum") == RLX2_OK);
    REQUIRE(rlx2_config_get(cfg.ptr, "env", buf, sizeof buf) == RLX2_OK);
    CHECK(std::string(buf) == "pendulum");

    CHECK(rlx2_config_load_file(cfg.ptr, "does-not-exist.cfg") == RLX2_ERR_USAGE);
    std::filesystem::remove(path);
}

TEST_CASE("training through the shared library emits the artifact set") {
    Config cfg = tiny_run_config();
    const std::string out_dir = "capi_test_run";
    rlx2_result* result = nullptr;
    REQUIRE(rlx2_train(cfg.ptr, out_dir.c_str(), &result) == RLX2_OK);
    REQUIRE(result != nullptr);

    CHECK(rlx2_result_eval_count(result) == 3);
    int64_t step = 0;
    double ret = 0.0;
    REQUIRE(rlx2_result_eval_point(result, 0, &step, &ret) == RLX2_OK);
    CHECK(step == 200);
    CHECK(rlx2_result_eval_point(result, 99, &step, &ret) == RLX2_ERR_USAGE);

    size_t needed = 0;
    CHECK(rlx2_result_summary_json(result, nullptr, 0, &needed) == RLX2_ERR_USAGE);
    std::vector<char> buf(needed);
    REQUIRE(rlx2_result_summary_json(result, buf.data(), buf.size(), nullptr) == RLX2_OK);
    CHECK(std::string(buf.data()).find("final_score") != std::string::npos);

    for (const char* f : {"manifest.txt", "metrics.csv", "summary.json", "checkpoint.txt",
                          "masks/actor_layer0.mask"})
        CHECK(std::filesystem::exists(out_dir + "/" + f));

    rlx2_result_free(result);
    std::filesystem::remove_all(out_dir);
}

TEST_CASE("identical configs give byte-identical metrics") {
    Config cfg = tiny_run_config();
    const std::string d1 = "capi_repro_1", d2 = "capi_repro_2";
    REQUIRE(rlx2_train(cfg.ptr, d1.c_str(), nullptr) == RLX2_OK);
    REQUIRE(rlx2_train(cfg.ptr, d2.c_str(), nullptr) == RLX2_OK);
    std::ifstream a(d1 + "/metrics.csv"), b(d2 + "/metrics.csv");
    const std::string ta((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string tb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(ta == tb);
    CHECK(!ta.empty());
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST_CASE("verification runs through the C surface") {
    std::vector<std::string> lines;
    CHECK(rlx2_verify("flops", 1, 0, collect_line, &lines) == RLX2_OK);
    REQUIRE(!lines.empty());
    CHECK(lines.back().find("[PASS]") != std::string::npos);

    CHECK(rlx2_verify("no-such-suite", 1, 0, nullptr, nullptr) == RLX2_ERR_USAGE);

    lines.clear();
    CHECK(rlx2_verify("conservation", 1, 1, collect_line, &lines) == RLX2_ERR_RUN);
    bool saw_fail = false;
    for (const auto& l : lines)
        if (l.find("[FAIL]") != std::string::npos) saw_fail = true;
    CHECK(saw_fail);
}

TEST_CASE("environment registry is visible") {
    char buf[128];
    REQUIRE(rlx2_env_list(buf, sizeof buf) == RLX2_OK);
    const std::string names(buf);
    CHECK(names.find("pendulum") != std::string::npos);
    CHECK(names.find("pointmass") != std::string::npos);
    CHECK(std::string(rlx2_version()).find('.') != std::string::npos);
}
