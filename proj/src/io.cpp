#include "io.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rlx2 {

namespace {

constexpr const char* kCheckpointMagic = "rlx2-checkpoint 1";

[[noreturn]] void parse_fail(const std::string& what, long line) {
    throw std::runtime_error("parse error at line " + std::to_string(line) + ": " + what);
}

std::string head_name(HeadKind h) {
    switch (h) {
        case HeadKind::Identity: return "identity";
        case HeadKind::BoundedSquash: return "bounded";
        case HeadKind::GaussianPair: return "gaussian";
    }
    return "identity";
}

HeadKind head_from_name(const std::string& s, long line) {
    if (s == "identity") return HeadKind::Identity;
    if (s == "bounded") return HeadKind::BoundedSquash;
    if (s == "gaussian") return HeadKind::GaussianPair;
    parse_fail("unknown head '" + s + "'", line);
}

class LineReader {
public:
    explicit LineReader(const std::string& text) : in_(text) {}

    std::string next(const std::string& what) {
        std::string line;
        if (!std::getline(in_, line)) parse_fail("unexpected end of file, expected " + what, line_);
        ++line_;
        return line;
    }

    long line() const { return line_; }

private:
    std::istringstream in_;
    long line_ = 0;
};

std::vector<double> parse_numbers(const std::string& line, size_t expected, long lineno,
                                  const std::string& what) {
    std::istringstream ss(line);
    std::vector<double> out;
    double v;
    while (ss >> v) out.push_back(v);
    if (out.size() != expected)
        parse_fail(what + ": expected " + std::to_string(expected) + " values, got " +
                       std::to_string(out.size()),
                   lineno);
    return out;
}

}  // namespace

std::string format_g17(double d) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", d);
    return buf;
}

std::string checkpoint_to_text(const Checkpoint& cp) {
    std::ostringstream os;
    os << kCheckpointMagic << '\n';
    os << "networks " << cp.networks.size() << '\n';
    for (const auto& [name, net] : cp.networks) {
        os << "network " << name << '\n';
        os << "head " << head_name(net.head) << '\n';
        if (net.head != HeadKind::Identity) {
            os << "squash " << net.squash_center.size() << '\n';
            for (int i = 0; i < net.squash_center.size(); ++i)
                os << (i ? " " : "") << format_g17(net.squash_center(i));
            os << '\n';
            for (int i = 0; i < net.squash_half.size(); ++i)
                os << (i ? " " : "") << format_g17(net.squash_half(i));
            os << '\n';
        }
        os << "layers " << net.layers.size() << '\n';
        for (const auto& layer : net.layers) {
            os << "layer " << layer.in_dim << ' ' << layer.out_dim << ' '
               << format_g17(layer.target_sparsity) << '\n';
            for (int r = 0; r < layer.out_dim; ++r) {
                for (int c = 0; c < layer.in_dim; ++c)
                    os << (c ? " " : "") << format_g17(layer.weights(r, c));
                os << '\n';
            }
            for (int r = 0; r < layer.out_dim; ++r) {
                for (int c = 0; c < layer.in_dim; ++c)
                    os << (c ? " " : "") << (layer.mask(r, c) != 0.0 ? 1 : 0);
                os << '\n';
            }
            for (int i = 0; i < layer.out_dim; ++i)
                os << (i ? " " : "") << format_g17(layer.bias(i));
            os << '\n';
        }
    }
    return os.str();
}

Checkpoint checkpoint_from_text(const std::string& text) {
    LineReader rd(text);
    if (rd.next("magic") != kCheckpointMagic) parse_fail("bad magic", 1);

    Checkpoint cp;
    std::istringstream hdr(rd.next("network count"));
    std::string word;
    size_t count = 0;
    if (!(hdr >> word >> count) || word != "networks")
        parse_fail("expected 'networks <count>'", rd.line());

    for (size_t n = 0; n < count; ++n) {
        std::istringstream netline(rd.next("network name"));
        std::string name;
        if (!(netline >> word >> name) || word != "network")
            parse_fail("expected 'network <name>'", rd.line());

        Mlp net;
        std::istringstream headline(rd.next("head"));
        std::string headword;
        if (!(headline >> word >> headword) || word != "head")
            parse_fail("expected 'head <kind>'", rd.line());
        net.head = head_from_name(headword, rd.line());

        if (net.head != HeadKind::Identity) {
            std::istringstream sq(rd.next("squash"));
            long dim = 0;
            if (!(sq >> word >> dim) || word != "squash" || dim <= 0)
                parse_fail("expected 'squash <dim>'", rd.line());
            const std::string center_line = rd.next("squash center");
            auto center = parse_numbers(center_line, static_cast<size_t>(dim), rd.line(),
                                        "squash center");
            const std::string half_line = rd.next("squash halfwidth");
            auto half = parse_numbers(half_line, static_cast<size_t>(dim), rd.line(),
                                      "squash halfwidth");
            net.squash_center = Eigen::Map<Eigen::VectorXd>(center.data(), dim);
            net.squash_half = Eigen::Map<Eigen::VectorXd>(half.data(), dim);
        }

        std::istringstream ll(rd.next("layer count"));
        size_t layer_count = 0;
        if (!(ll >> word >> layer_count) || word != "layers")
            parse_fail("expected 'layers <count>'", rd.line());

        for (size_t l = 0; l < layer_count; ++l) {
            std::istringstream lh(rd.next("layer header"));
            MaskedLinear layer;
            if (!(lh >> word >> layer.in_dim >> layer.out_dim >> layer.target_sparsity) ||
                word != "layer" || layer.in_dim <= 0 || layer.out_dim <= 0)
                parse_fail("expected 'layer <in> <out> <sparsity>'", rd.line());

            layer.weights.resize(layer.out_dim, layer.in_dim);
            for (int r = 0; r < layer.out_dim; ++r) {
                const std::string line = rd.next("weight row");
                auto row = parse_numbers(line, static_cast<size_t>(layer.in_dim), rd.line(),
                                         "weight row");
                for (int c = 0; c < layer.in_dim; ++c) layer.weights(r, c) = row[c];
            }
            layer.mask.resize(layer.out_dim, layer.in_dim);
            for (int r = 0; r < layer.out_dim; ++r) {
                const std::string line = rd.next("mask row");
                auto row = parse_numbers(line, static_cast<size_t>(layer.in_dim), rd.line(),
                                         "mask row");
                for (int c = 0; c < layer.in_dim; ++c) {
                    if (row[c] != 0.0 && row[c] != 1.0)
                        parse_fail("mask entries must be 0 or 1", rd.line());
                    layer.mask(r, c) = row[c];
                }
            }
            const std::string bias_line = rd.next("bias row");
            auto bias = parse_numbers(bias_line, static_cast<size_t>(layer.out_dim), rd.line(),
                                      "bias row");
            layer.bias = Eigen::Map<Eigen::VectorXd>(bias.data(), layer.out_dim);
            net.layers.push_back(std::move(layer));
        }
        cp.networks.emplace_back(name, std::move(net));
    }
    return cp;
}

void write_checkpoint(const std::string& path, const Checkpoint& cp) {
    write_text_file(path, checkpoint_to_text(cp));
}

Checkpoint read_checkpoint(const std::string& path) {
    return checkpoint_from_text(read_text_file(path));
}

std::string mask_to_text(const Eigen::MatrixXd& mask) {
    std::ostringstream os;
    os << mask.rows() << ' ' << mask.cols() << '\n';
    for (long r = 0; r < mask.rows(); ++r) {
        for (long c = 0; c < mask.cols(); ++c)
            os << (c ? " " : "") << (mask(r, c) != 0.0 ? 1 : 0);
        os << '\n';
    }
    return os.str();
}

Eigen::MatrixXd mask_from_text(const std::string& text) {
    LineReader rd(text);
    std::istringstream hdr(rd.next("dimensions"));
    long rows = 0, cols = 0;
    if (!(hdr >> rows >> cols) || rows <= 0 || cols <= 0)
        parse_fail("expected 'rows cols'", rd.line());
    Eigen::MatrixXd mask(rows, cols);
    for (long r = 0; r < rows; ++r) {
        const std::string line = rd.next("mask row");
        auto row = parse_numbers(line, static_cast<size_t>(cols), rd.line(), "mask row");
        for (long c = 0; c < cols; ++c) {
            if (row[c] != 0.0 && row[c] != 1.0) parse_fail("mask entries must be 0 or 1", rd.line());
            mask(r, c) = row[c];
        }
    }
    return mask;
}

void write_mask(const std::string& path, const Eigen::MatrixXd& mask) {
    write_text_file(path, mask_to_text(mask));
}

Eigen::MatrixXd read_mask(const std::string& path) {
    return mask_from_text(read_text_file(path));
}

void write_mask_dump(const std::string& dir, const std::string& net_name, const Mlp& net) {
    std::filesystem::create_directories(dir);
    for (size_t l = 0; l < net.layers.size(); ++l) {
        const std::string path =
            dir + "/" + net_name + "_layer" + std::to_string(l) + ".mask";
        write_mask(path, net.layers[l].mask);
    }
}

std::vector<Eigen::MatrixXd> read_mask_dump(const std::string& dir, const std::string& net_name,
                                            size_t layer_count) {
    std::vector<Eigen::MatrixXd> masks;
    for (size_t l = 0; l < layer_count; ++l) {
        const std::string path =
            dir + "/" + net_name + "_layer" + std::to_string(l) + ".mask";
        masks.push_back(read_mask(path));
    }
    return masks;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os << kMetricsHeader << '\n';
    for (const auto& r : rows) {
        os << r.step << ',' << format_g17(r.eval_return) << ',' << r.buffer_size << ',';
        if (r.distance_known) os << format_g17(r.policy_distance);
        os << ',' << r.drops << ',' << r.actor_active << ',' << r.critic_active << ','
           << format_g17(r.train_flops_cum) << '\n';
    }
    return os.str();
}

std::string manifest_text(const TrainConfig& cfg) {
    std::ostringstream os;
    os << "# rlx2 run manifest; pass back via --config to reproduce the run\n";
    char fp[32];
    std::snprintf(fp, sizeof(fp), "%016llx",
                  static_cast<unsigned long long>(cfg.fingerprint()));
    os << "# fingerprint " << fp << '\n';
    for (const auto& [k, v] : cfg.as_map()) os << k << '=' << v << '\n';
    return os.str();
}

std::string summary_json(const TrainConfig& cfg, double final_score,
                         const FlopsReport& flops,
                         const std::map<std::string, double>& counters) {
    nlohmann::json j;
    j["algorithm"] = algorithm_name(cfg.algorithm);
    j["env"] = cfg.env_name;
    j["topology"] = topology_name(cfg.topology);
    j["seed"] = cfg.seed;
    j["actor_sparsity"] = cfg.actor_sparsity;
    j["critic_sparsity"] = cfg.critic_sparsity;
    char fp[32];
    std::snprintf(fp, sizeof(fp), "%016llx",
                  static_cast<unsigned long long>(cfg.fingerprint()));
    j["fingerprint"] = fp;
    j["final_score"] = final_score;

    nlohmann::json f;
    f["actor_forward_flops"] = flops.actor_forward_flops;
    f["critic_forward_flops"] = flops.critic_forward_flops;
    f["train_flops_per_iter"] = flops.train_flops_per_iter;
    f["train_flops_total"] = flops.train_flops_total;
    f["inference_flops"] = flops.inference_flops;
    f["actor_size"] = flops.actor_size;
    f["critic_size"] = flops.critic_size;
    f["total_size"] = flops.total_size;
    f["dense_total_size"] = flops.dense_total_size;
    f["size_ratio"] = flops.size_ratio;
    f["train_flops_ratio"] = flops.train_flops_ratio;
    f["inference_flops_ratio"] = flops.inference_flops_ratio;
    j["flops_report"] = f;

    for (const auto& [k, v] : counters) j["counters"][k] = v;
    return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("failed writing file '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace rlx2
