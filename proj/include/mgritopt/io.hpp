#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgrit.hpp"

namespace mgritopt {

namespace detail {

inline void put_bytes(std::ostream& os, std::uint64_t v, int nbytes) {
    unsigned char b[8];
    for (int i = 0; i < nbytes; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), nbytes);
}

inline std::uint64_t get_bytes(std::istream& is, int nbytes) {
    unsigned char b[8] = {};
    is.read(reinterpret_cast<char*>(b), nbytes);
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void put_f64(std::ostream& os, double x) { put_bytes(os, std::bit_cast<std::uint64_t>(x), 8); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_bytes(is, 8)); }

} // namespace detail

inline constexpr char kTrajectoryMagic[8] = {'M', 'G', 'T', 'R', 'A', 'J', '0', '1'};

struct TrajectoryHeader {
    std::uint32_t version = 1;
    ProblemKind kind = ProblemKind::Mp1;
    std::uint32_t d = 1;
    std::uint64_t n = 0;
    std::uint64_t n_t = 0;
    std::uint64_t stride = 1;
    std::uint64_t seed = 0;
    std::uint64_t count = 0;
};

struct TrajectoryFile {
    TrajectoryHeader header;
    std::vector<std::pair<std::uint64_t, Vec>> points;
};

/// Binary checkpoint of a (possibly strided) trajectory: fixed header, then
/// `count` records of (u64 index, N little-endian f64 values).
inline void write_trajectory_checkpoint(const std::filesystem::path& path,
                                        const ProblemInstance& prob,
                                        const SequentialResult& seq) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    os.write(kTrajectoryMagic, 8);
    detail::put_bytes(os, 1, 4);
    detail::put_bytes(os, static_cast<std::uint64_t>(prob.kind), 4);
    detail::put_bytes(os, static_cast<std::uint64_t>(prob.A.d), 4);
    detail::put_bytes(os, 0, 4);
    detail::put_bytes(os, static_cast<std::uint64_t>(prob.A.n), 8);
    detail::put_bytes(os, static_cast<std::uint64_t>(seq.n_t), 8);
    detail::put_bytes(os, static_cast<std::uint64_t>(seq.trajectory.stride()), 8);
    detail::put_bytes(os, prob.seed, 8);
    const auto& stored = seq.trajectory.stored();
    detail::put_bytes(os, stored.size(), 8);
    for (const auto& [index, u] : stored) {
        detail::put_bytes(os, static_cast<std::uint64_t>(index), 8);
        for (Eigen::Index i = 0; i < u.size(); ++i) detail::put_f64(os, u[i]);
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline TrajectoryFile read_trajectory_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kTrajectoryMagic, 8) != 0)
        throw std::runtime_error("not a trajectory checkpoint: " + path.string());
    TrajectoryFile f;
    f.header.version = static_cast<std::uint32_t>(detail::get_bytes(is, 4));
    f.header.kind = static_cast<ProblemKind>(detail::get_bytes(is, 4));
    f.header.d = static_cast<std::uint32_t>(detail::get_bytes(is, 4));
    detail::get_bytes(is, 4);
    f.header.n = detail::get_bytes(is, 8);
    f.header.n_t = detail::get_bytes(is, 8);
    f.header.stride = detail::get_bytes(is, 8);
    f.header.seed = detail::get_bytes(is, 8);
    f.header.count = detail::get_bytes(is, 8);
    const Eigen::Index N =
        f.header.d == 2 ? static_cast<Eigen::Index>(f.header.n * f.header.n)
                        : static_cast<Eigen::Index>(f.header.n);
    f.points.resize(f.header.count);
    for (auto& [index, u] : f.points) {
        index = detail::get_bytes(is, 8);
        u.resize(N);
        for (Eigen::Index i = 0; i < N; ++i) u[i] = detail::get_f64(is);
    }
    if (!is) throw std::runtime_error("truncated trajectory checkpoint: " + path.string());
    return f;
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i)
        os << header[i] << (i + 1 < header.size() ? ',' : '\n');
    os.precision(17);
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << row[i] << (i + 1 < row.size() ? ',' : '\n');
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline nlohmann::ordered_json report_to_json(const ConvergenceReport& rep) {
    nlohmann::ordered_json j;
    j["problem"] = {{"kind", rep.problem_kind}, {"n", rep.n},      {"d", rep.d},
                    {"lambda", rep.lambda},     {"seed", rep.seed}};
    j["config"] = {{"m", rep.m},          {"levels", rep.levels},   {"nt", rep.nt},
                   {"nt_padded", rep.nt_padded}, {"tol", rep.tol}, {"max_iter", rep.max_iter},
                   {"variant", rep.variant},     {"threads", rep.threads},
                   {"fine_step", rep.fine_step}};
    j["result"] = {{"halted", to_string(rep.halted)},
                   {"iterations", rep.iterations},
                   {"residual_norms", rep.residual_norms},
                   {"gradient_norms", rep.gradient_norms},
                   {"rho_r", rep.rho_r}};
    if (!rep.error_norms.empty()) {
        j["result"]["error_norms"] = rep.error_norms;
        j["result"]["rho_e"] = rep.rho_e;
    }
    j["timing"] = {{"total_seconds", rep.total_seconds},
                   {"iteration_seconds", rep.iteration_seconds}};
    return j;
}

inline nlohmann::ordered_json sequential_report_to_json(const ProblemInstance& prob,
                                                        const SequentialResult& seq,
                                                        std::size_t max_history = 20000) {
    nlohmann::ordered_json j;
    j["problem"] = {{"kind", to_string(prob.kind)}, {"n", prob.A.n},      {"d", prob.A.d},
                    {"lambda", prob.lambda},        {"seed", prob.seed}};
    j["config"] = {{"method", to_string(seq.method)}, {"step", seq.step}};
    std::size_t stride = 1;
    if (seq.gradient_norms.size() > max_history)
        stride = (seq.gradient_norms.size() + max_history - 1) / max_history;
    std::vector<double> hist;
    for (std::size_t k = 0; k < seq.gradient_norms.size(); k += stride)
        hist.push_back(seq.gradient_norms[k]);
    if (stride > 1 && (seq.gradient_norms.size() - 1) % stride != 0)
        hist.push_back(seq.gradient_norms.back());
    j["result"] = {{"n_t", seq.n_t},
                   {"converged", seq.converged},
                   {"final_gradient_norm", seq.gradient_norms.back()},
                   {"gradient_history_stride", stride},
                   {"gradient_norms", hist},
                   {"trajectory_stride", seq.trajectory.stride()}};
    j["timing"] = {{"total_seconds", seq.seconds}};
    return j;
}

inline nlohmann::ordered_json adaptive_report_to_json(const AdaptiveReport& rep) {
    nlohmann::ordered_json j;
    j["target_gradient"] = rep.target_gradient;
    j["achieved_gradient"] = rep.achieved_gradient;
    j["halted"] = to_string(rep.halted);
    j["total_steps"] = rep.total_steps;
    j["window_steps"] = rep.window_steps;
    j["windows"] = nlohmann::ordered_json::array();
    for (const auto& w : rep.windows) j["windows"].push_back(report_to_json(w));
    return j;
}

} // namespace mgritopt
