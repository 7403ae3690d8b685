// SPDX-License-Identifier: MIT
#include "ctrc/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ctrc {

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

Shape read_header_shape(std::istream& in, const std::string& path) {
    Index D = 0;
    if (!(in >> D) || D < 1)
        throw std::runtime_error("bad tensor order in " + path);
    Shape shape(static_cast<std::size_t>(D));
    for (auto& s : shape)
        if (!(in >> s) || s < 1)
            throw std::runtime_error("bad dimension size in " + path);
    return shape;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

CooData read_coo(const std::string& path) {
    auto in = open_in(path);
    Shape shape = read_header_shape(in, path);
    long long nnz = 0;
    if (!(in >> nnz) || nnz < 0)
        throw std::runtime_error("bad entry count in " + path);

    DenseTensor t(shape);
    std::vector<Index> offsets;
    offsets.reserve(static_cast<std::size_t>(nnz));
    Shape idx(shape.size());
    for (long long e = 0; e < nnz; ++e) {
        for (std::size_t d = 0; d < shape.size(); ++d) {
            Index v = 0;
            if (!(in >> v))
                throw std::runtime_error("truncated entry list in " + path);
            if (v < 1 || v > shape[d])
                throw std::runtime_error("index out of bounds in " + path);
            idx[d] = v - 1;
        }
        double value = 0.0;
        if (!(in >> value))
            throw std::runtime_error("truncated entry list in " + path);
        const Index off = t.offset(idx);
        t[off] = value;
        offsets.push_back(off);
    }
    // the mask constructor rejects duplicates
    return {std::move(t), ObservationMask(shape, std::move(offsets))};
}

void write_coo(const std::string& path, const DenseTensor& t, const ObservationMask& m) {
    if (t.shape() != m.shape())
        throw std::invalid_argument("write_coo: tensor and mask shapes differ");
    auto out = open_out(path);
    out << t.order();
    for (Index s : t.shape())
        out << ' ' << s;
    out << '\n' << m.count() << '\n';
    for (Index off : m.offsets()) {
        const Shape idx = t.multi_index(off);
        for (Index v : idx)
            out << v + 1 << ' ';
        out << format_double(t[off]) << '\n';
    }
}

DenseTensor read_dense(const std::string& path) {
    auto in = open_in(path);
    Shape shape = read_header_shape(in, path);
    DenseTensor t(shape);
    for (Index i = 0; i < t.size(); ++i)
        if (!(in >> t[i]))
            throw std::runtime_error("truncated dense tensor in " + path);
    return t;
}

void write_dense(const std::string& path, const DenseTensor& t) {
    auto out = open_out(path);
    out << t.order();
    for (Index s : t.shape())
        out << ' ' << s;
    out << '\n';
    for (Index i = 0; i < t.size(); ++i)
        out << format_double(t[i]) << '\n';
}

TrFactorSet read_factors(const std::string& path) {
    auto in = open_in(path);
    Index D = 0;
    if (!(in >> D) || D < 1)
        throw std::runtime_error("bad factor count in " + path);
    std::vector<Index> bonds(static_cast<std::size_t>(D) + 1);
    for (auto& r : bonds)
        if (!(in >> r) || r < 1)
            throw std::runtime_error("bad bond dimension in " + path);
    if (bonds.front() != bonds.back())
        throw std::runtime_error("ring closure violated in " + path);
    Shape dims(static_cast<std::size_t>(D));
    for (auto& s : dims)
        if (!(in >> s) || s < 1)
            throw std::runtime_error("bad dimension size in " + path);

    std::vector<DenseTensor> cores;
    cores.reserve(static_cast<std::size_t>(D));
    for (Index d = 0; d < D; ++d) {
        DenseTensor core(Shape{bonds[static_cast<std::size_t>(d)], dims[static_cast<std::size_t>(d)],
                               bonds[static_cast<std::size_t>(d) + 1]});
        for (Index i = 0; i < core.size(); ++i)
            if (!(in >> core[i]))
                throw std::runtime_error("truncated core data in " + path);
        cores.push_back(std::move(core));
    }
    return TrFactorSet(std::move(cores));
}

void write_factors(const std::string& path, const TrFactorSet& f) {
    auto out = open_out(path);
    const Index D = f.order();
    out << D << '\n';
    for (Index d = 0; d <= D; ++d)
        out << f.bond(d) << (d == D ? '\n' : ' ');
    const Shape dims = f.dims();
    for (Index d = 0; d < D; ++d)
        out << dims[static_cast<std::size_t>(d)] << (d == D - 1 ? '\n' : ' ');
    for (Index d = 0; d < D; ++d) {
        const DenseTensor& c = f.core(d);
        for (Index i = 0; i < c.size(); ++i)
            out << format_double(c[i]) << '\n';
    }
}

KeyValues KeyValues::parse_file(const std::string& path) {
    auto in = open_in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

KeyValues KeyValues::parse_text(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("malformed key-value line: " + line);
        kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

bool KeyValues::has(const std::string& key) const { return index_.count(key) != 0; }

const std::string& KeyValues::get(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end())
        throw std::runtime_error("missing key: " + key);
    return entries_[it->second].second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
    auto it = index_.find(key);
    return it == index_.end() ? fallback : entries_[it->second].second;
}

double KeyValues::number(const std::string& key) const {
    try {
        return std::stod(get(key));
    } catch (const std::logic_error&) {
        throw std::runtime_error("key " + key + " is not a number");
    }
}

long long KeyValues::integer(const std::string& key) const {
    try {
        return std::stoll(get(key));
    } catch (const std::logic_error&) {
        throw std::runtime_error("key " + key + " is not an integer");
    }
}

std::vector<double> KeyValues::numbers(const std::string& key) const {
    std::istringstream in(get(key));
    std::vector<double> out;
    double v;
    while (in >> v)
        out.push_back(v);
    if (out.empty())
        throw std::runtime_error("key " + key + " holds no numbers");
    return out;
}

std::vector<Index> KeyValues::integers(const std::string& key) const {
    std::istringstream in(get(key));
    std::vector<Index> out;
    Index v;
    while (in >> v)
        out.push_back(v);
    if (out.empty())
        throw std::runtime_error("key " + key + " holds no integers");
    return out;
}

void KeyValues::set(const std::string& key, const std::string& value) {
    auto it = index_.find(key);
    if (it != index_.end()) {
        entries_[it->second].second = value;
        return;
    }
    index_[key] = entries_.size();
    entries_.emplace_back(key, value);
}

void KeyValues::set_number(const std::string& key, double value) { set(key, format_double(value)); }

void KeyValues::set_integer(const std::string& key, long long value) {
    set(key, std::to_string(value));
}

void KeyValues::set_numbers(const std::string& key, std::span<const double> values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            s += ' ';
        s += format_double(values[i]);
    }
    set(key, s);
}

void KeyValues::set_integers(const std::string& key, std::span<const Index> values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            s += ' ';
        s += std::to_string(values[i]);
    }
    set(key, s);
}

void KeyValues::write_file(const std::string& path) const {
    auto out = open_out(path);
    for (const auto& [k, v] : entries_)
        out << k << " = " << v << '\n';
}

namespace {

SolverConfig config_from_keys(const KeyValues& kv) {
    SolverConfig cfg;
    if (kv.has("max_iters"))
        cfg.max_iters = static_cast<int>(kv.integer("max_iters"));
    if (kv.has("tol"))
        cfg.tol = kv.number("tol");
    if (kv.has("seed"))
        cfg.seed = static_cast<std::uint64_t>(kv.integer("seed"));
    if (kv.has("threads"))
        cfg.threads = static_cast<int>(kv.integer("threads"));
    if (kv.has("parallel_rows"))
        cfg.parallel_rows = kv.integer("parallel_rows") != 0;
    if (kv.has("init")) {
        const std::string init = kv.get("init");
        if (init == "random-normal")
            cfg.init = InitMethod::RandomNormal;
        else if (init == "tr-svd-zero-fill")
            cfg.init = InitMethod::TrSvdZeroFill;
        else
            throw std::runtime_error("unknown init method: " + init);
    }
    return cfg;
}

} // namespace

Manifest read_manifest(const std::string& path) {
    const KeyValues kv = KeyValues::parse_file(path);
    const auto dir = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (dir / fp).string();
    };

    Manifest m;
    const int n = static_cast<int>(kv.integer("n_tensors"));
    if (n < 1)
        throw std::runtime_error("n_tensors must be positive");
    m.problem.spec.n_tensors = n;

    bool any_truth = false;
    for (int i = 1; i <= n; ++i) {
        const std::string tkey = "tensor_" + std::to_string(i);
        CooData coo = read_coo(resolve(kv.get(tkey)));
        m.problem.tensors.push_back(std::move(coo.tensor));
        m.problem.masks.push_back(std::move(coo.mask));
        m.problem.spec.ranks.emplace_back(kv.integers("rank_" + std::to_string(i)));
        if (kv.has("truth_" + std::to_string(i)))
            any_truth = true;
    }
    if (any_truth)
        for (int i = 1; i <= n; ++i)
            m.ground_truth.push_back(read_dense(resolve(kv.get("truth_" + std::to_string(i)))));

    m.problem.spec.shared_modes = kv.has("coupled_modes") ? static_cast<int>(kv.integer("coupled_modes")) : 0;
    const Index L = m.problem.spec.shared_modes;
    if (L > 0) {
        if (kv.has("coupled_dims")) {
            m.problem.spec.coupled_dims = kv.integers("coupled_dims");
        } else {
            // default: fully coupled bonds, the smallest rank at each boundary
            for (Index d = 0; d <= L; ++d) {
                Index g = m.problem.spec.ranks[0].bond(d);
                for (const auto& r : m.problem.spec.ranks)
                    g = std::min(g, r.bond(d));
                m.problem.spec.coupled_dims.push_back(g);
            }
        }
    }
    m.config = config_from_keys(kv);
    return m;
}

void write_manifest(const std::string& path, const std::vector<std::string>& tensor_files,
                    const std::vector<std::string>& truth_files, const CouplingSpec& spec,
                    const SolverConfig& config) {
    KeyValues kv;
    kv.set_integer("n_tensors", spec.n_tensors);
    for (int i = 0; i < spec.n_tensors; ++i) {
        kv.set("tensor_" + std::to_string(i + 1), tensor_files[static_cast<std::size_t>(i)]);
        kv.set_integers("rank_" + std::to_string(i + 1),
                        spec.ranks[static_cast<std::size_t>(i)].values);
        if (!truth_files.empty())
            kv.set("truth_" + std::to_string(i + 1), truth_files[static_cast<std::size_t>(i)]);
    }
    kv.set_integer("coupled_modes", spec.shared_modes);
    if (spec.shared_modes > 0)
        kv.set_integers("coupled_dims", spec.coupled_dims);
    kv.set_integer("max_iters", config.max_iters);
    kv.set_number("tol", config.tol);
    kv.set_integer("seed", static_cast<long long>(config.seed));
    kv.set("init", config.init == InitMethod::RandomNormal ? "random-normal" : "tr-svd-zero-fill");
    kv.set_integer("threads", config.threads);
    kv.set_integer("parallel_rows", config.parallel_rows ? 1 : 0);
    kv.write_file(path);
}

void write_report(const std::string& path, const SolveReport& rep) {
    KeyValues kv;
    kv.set_integer("iterations", rep.iterations);
    kv.set_numbers("objective", rep.objective);
    kv.set_numbers("relative_change", rep.relative_change);
    for (std::size_t n = 0; n < rep.rmse.size(); ++n)
        kv.set_numbers("rmse_" + std::to_string(n + 1), rep.rmse[n]);
    if (!rep.update_objective.empty())
        kv.set_numbers("update_objective", rep.update_objective);
    kv.set_number("wall_seconds", rep.wall_seconds);
    kv.set_number("hessian_seconds", rep.hessian_seconds);
    kv.set_numbers("iter_seconds", rep.iter_seconds);
    kv.write_file(path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    auto out = open_out(path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << header[i] << (i + 1 == header.size() ? '\n' : ',');
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 == row.size() ? '\n' : ',');
}

} // namespace ctrc
