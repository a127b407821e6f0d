#include "sgs/io.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sgs/rng.hpp"

namespace sgs::io {

namespace {
using nlohmann::json;

constexpr char kMagic[4] = {'S', 'G', 'S', '1'};

const char* kConventions =
    "rows top-to-bottom; unitaries[c][t] act on effective rows t..t+M (top row "
    "most significant), applied per column for t descending; tensors row-major "
    "complex128 little-endian";

void append_tensor(std::string& payload, json& dir, const std::string& name,
                   const DenseTensor& t) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = payload.size();
    entry["count"] = t.numel();
    dir.push_back(entry);
    const char* raw = reinterpret_cast<const char*>(t.data().data());
    payload.append(raw, raw + sizeof(cplx) * t.numel());
}

DenseTensor read_tensor(const std::string& payload, const json& entry) {
    std::vector<std::int64_t> shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t count = entry.at("count").get<std::size_t>();
    if (offset + count * sizeof(cplx) > payload.size())
        throw ValidationError("state file: tensor payload out of bounds");
    std::vector<cplx> data(count);
    std::memcpy(data.data(), payload.data() + offset, count * sizeof(cplx));
    return DenseTensor(std::move(shape), std::move(data));
}

std::string container_bytes(const json& header, const std::string& payload) {
    const std::string head = header.dump();
    std::string out;
    out.append(kMagic, 4);
    const std::uint64_t len = head.size();
    char lenbuf[8];
    std::memcpy(lenbuf, &len, 8);
    out.append(lenbuf, 8);
    out += head;
    out += payload;
    return out;
}

std::pair<json, std::string> parse_container(const std::string& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw ValidationError("state file: bad magic");
    std::uint64_t len = 0;
    std::memcpy(&len, bytes.data() + 4, 8);
    if (12 + len > bytes.size()) throw ValidationError("state file: truncated header");
    json header = json::parse(bytes.substr(12, len));
    return {header, bytes.substr(12 + len)};
}
} // namespace

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    }
    fs::rename(tmp, target);
}

std::string config_hash(const nlohmann::json& config) {
    const std::string dump = config.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

void save_state(const SGSState& s, const std::string& path) {
    json header;
    header["format_version"] = kStateFormatVersion;
    header["library"] = kLibraryVersion;
    header["conventions"] = kConventions;
    header["generator"] = rng::kGeneratorName;
    header["params"] = {{"rows", s.params.physical.rows},
                        {"cols", s.params.physical.cols},
                        {"local_dim", s.params.physical.local_dim},
                        {"M", s.params.M},
                        {"D", s.params.D},
                        {"N", s.params.N}};
    json dir = json::array();
    std::string payload;
    for (int r = 0; r < s.eff_rows(); ++r)
        for (int c = 0; c < s.cols(); ++c)
            append_tensor(payload, dir, "row" + std::to_string(r) + "_site" + std::to_string(c),
                          s.rows[r].tensors[c]);
    for (std::size_t c = 0; c < s.unitaries.size(); ++c)
        for (std::size_t t = 0; t < s.unitaries[c].size(); ++t)
            append_tensor(payload, dir, "u_col" + std::to_string(c) + "_t" + std::to_string(t),
                          s.unitaries[c][t]);
    header["tensors"] = dir;
    atomic_write(path, container_bytes(header, payload));
}

SGSState load_state(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open state file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    auto [header, payload] = parse_container(buf.str());
    if (header.at("format_version").get<int>() != kStateFormatVersion)
        throw ValidationError("state file: unsupported format version");

    SGSParams params;
    const auto& p = header.at("params");
    params.physical = {p.at("rows").get<int>(), p.at("cols").get<int>(),
                       p.at("local_dim").get<int>()};
    params.M = p.at("M").get<int>();
    params.D = p.at("D").get<int>();
    params.N = p.at("N").get<int>();

    std::map<std::string, DenseTensor> tensors;
    for (const auto& entry : header.at("tensors"))
        tensors.emplace(entry.at("name").get<std::string>(), read_tensor(payload, entry));

    std::vector<MPSRow> rows;
    for (int r = 0; r < params.eff_rows(); ++r) {
        MPSRow row;
        for (int c = 0; c < params.physical.cols; ++c) {
            auto it = tensors.find("row" + std::to_string(r) + "_site" + std::to_string(c));
            if (it == tensors.end()) throw ValidationError("state file: missing row tensor");
            row.tensors.push_back(it->second);
        }
        rows.push_back(std::move(row));
    }
    std::vector<std::vector<DenseTensor>> unitaries;
    const int nu = params.unitaries_per_column();
    if (nu > 0) {
        for (int c = 0; c < params.physical.cols; ++c) {
            std::vector<DenseTensor> col;
            for (int t = 0; t < nu; ++t) {
                auto it = tensors.find("u_col" + std::to_string(c) + "_t" + std::to_string(t));
                if (it == tensors.end()) throw ValidationError("state file: missing unitary");
                col.push_back(it->second);
            }
            unitaries.push_back(std::move(col));
        }
    }
    return new_sgs(params, std::move(rows), std::move(unitaries));
}

void save_prep_sequence(const PrepSequence& seq, const std::string& path) {
    json out;
    out["library"] = kLibraryVersion;
    out["lattice"] = {{"rows", seq.physical.rows},
                      {"cols", seq.physical.cols},
                      {"local_dim", seq.physical.local_dim}};
    json gates = json::array();
    for (const auto& g : seq.gates) {
        json jg;
        json sites = json::array();
        for (auto [r, c] : g.sites) sites.push_back({r, c});
        jg["sites"] = sites;
        jg["dim"] = g.gate.dim(0);
        json re = json::array(), im = json::array();
        for (const auto& v : g.gate.data()) {
            re.push_back(v.real());
            im.push_back(v.imag());
        }
        jg["re"] = re;
        jg["im"] = im;
        gates.push_back(std::move(jg));
    }
    out["gates"] = std::move(gates);
    atomic_write(path, out.dump(2) + "\n");
}

void save_peps(const PepsGrid& grid, const LatticeSpec& spec, const std::string& path) {
    json header;
    header["format_version"] = kStateFormatVersion;
    header["library"] = kLibraryVersion;
    header["kind"] = "peps";
    header["modes"] = "l,u,r,d,phys";
    header["lattice"] = {{"rows", grid.rows}, {"cols", grid.cols}, {"local_dim", spec.local_dim}};
    json dir = json::array();
    std::string payload;
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c)
            append_tensor(payload, dir, "b_" + std::to_string(r) + "_" + std::to_string(c),
                          grid.at(r, c));
    header["tensors"] = dir;
    atomic_write(path, container_bytes(header, payload));
}

void save_trace(const EnergyTrace& trace, const std::string& path) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& r : trace.records) {
        json rec;
        rec["phase"] = r.phase;
        rec["row"] = r.row;
        rec["col"] = r.col;
        rec["energy"] = r.energy;
        rec["delta"] = r.delta;
        rec["predicted_change"] = r.predicted_change;
        rec["accepted"] = r.accepted;
        os << rec.dump() << "\n";
    }
    json tail;
    tail["converged"] = trace.converged;
    tail["outer_iterations"] = trace.outer_iterations;
    tail["final_energy"] = trace.final_energy();
    os << tail.dump() << "\n";
    atomic_write(path, os.str());
}

nlohmann::json decay_report_json(const DecayReport& report) {
    json out;
    out["direction"] = report.direction;
    out["deltas"] = report.deltas;
    json re = json::array(), im = json::array();
    for (const auto& v : report.values) {
        re.push_back(v.real());
        im.push_back(v.imag());
    }
    out["re"] = re;
    out["im"] = im;
    out["fit"] = {{"xi", report.fit.xi},
                  {"r2", report.fit.r2},
                  {"points_used", report.fit.points_used},
                  {"ok", report.fit.ok}};
    return out;
}

std::string decay_report_csv(const DecayReport& report) {
    std::ostringstream os;
    os.precision(17);
    os << "delta,re,im,abs\n";
    for (std::size_t i = 0; i < report.deltas.size(); ++i)
        os << report.deltas[i] << "," << report.values[i].real() << ","
           << report.values[i].imag() << "," << std::abs(report.values[i]) << "\n";
    return os.str();
}

nlohmann::json g_analysis_json(const GMatrixAnalysis& analysis) {
    json out;
    out["mu_re"] = analysis.mu.real();
    out["mu_im"] = analysis.mu.imag();
    out["gap"] = analysis.gap;
    out["degenerate"] = analysis.degenerate;
    out["product_deviation"] = analysis.product_deviation;
    out["epsilon"] = analysis.epsilon;
    return out;
}

nlohmann::json ResultRecord::to_json() const {
    nlohmann::json out;
    out["model"] = model;
    out["lattice"] = std::to_string(lattice.rows) + "x" + std::to_string(lattice.cols);
    out["family"] = family;
    out["D"] = D;
    out["M"] = M;
    out["N"] = N;
    out["E0"] = e0;
    if (reference) {
        out["reference"] = *reference;
        out["rel_error"] = std::abs(e0 - *reference) / std::abs(*reference);
    }
    out["wall_time_s"] = wall_time_s;
    out["seed"] = seed;
    out["trace"] = trace_path;
    out["comparable"] = comparable;
    return out;
}

std::string ResultRecord::csv_header() {
    return "model,lattice,family,D,M,N,E0,reference,rel_error,wall_time_s,seed,trace,comparable";
}

std::string ResultRecord::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << model << "," << lattice.rows << "x" << lattice.cols << "," << family << "," << D << ","
       << M << "," << N << "," << e0 << ",";
    if (reference)
        os << *reference << "," << std::abs(e0 - *reference) / std::abs(*reference);
    else
        os << ",";
    os << "," << wall_time_s << "," << seed << "," << trace_path << ","
       << (comparable ? "yes" : "no");
    return os.str();
}

} // namespace sgs::io
