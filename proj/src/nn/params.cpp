#include "tabgraph/nn/params.hpp"

#include "tabgraph/errors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tabgraph::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

Parameter& ParamStore::add(const std::string& name, Tensor init) {
    if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
    Parameter p;
    p.name = name;
    p.grad = Tensor(init.shape());
    p.first_moment = Tensor(init.shape());
    p.second_moment = Tensor(init.shape());
    p.value = std::move(init);
    params_.push_back(std::move(p));
    return params_.back();
}

const Parameter* ParamStore::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

const Parameter& ParamStore::get(const std::string& name) const {
    const auto* p = find(name);
    if (p == nullptr) throw ConfigError("unknown parameter: " + name);
    return *p;
}

Parameter& ParamStore::get(const std::string& name) {
    return const_cast<Parameter&>(static_cast<const ParamStore&>(*this).get(name));
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::scale_grad(double factor) {
    for (auto& p : params_)
        for (auto& g : p.grad.data()) g *= factor;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.step_ != b.step_ || a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
        const auto& x = a.params_[i];
        const auto& y = b.params_[i];
        if (x.name != y.name || x.value != y.value || x.first_moment != y.first_moment ||
            x.second_moment != y.second_moment)
            return false;
    }
    return true;
}

void adam_step(ParamStore& params, double lr, double beta1, double beta2, double eps) {
    const auto t = params.step() + 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (auto& p : params.all()) {
        auto value = p.value.data();
        auto grad = p.grad.data();
        auto m = p.first_moment.data();
        auto v = p.second_moment.data();
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
    params.set_step(t);
}

namespace {

constexpr char magic[4] = {'T', 'G', 'C', 'K'};

class Writer {
public:
    template <typename T>
    void pod(T x) {
        const auto* b = reinterpret_cast<const char*>(&x);
        bytes_.insert(bytes_.end(), b, b + sizeof(T));
    }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const char*>(p);
        bytes_.insert(bytes_.end(), b, b + n);
    }
    void tensor(const std::string& name, const Tensor& t) {
        pod(static_cast<std::uint32_t>(name.size()));
        raw(name.data(), name.size());
        pod(std::uint8_t{0});
        pod(static_cast<std::uint32_t>(t.rank()));
        for (const auto d : t.shape()) pod(static_cast<std::uint64_t>(d));
        raw(t.ptr(), t.size() * sizeof(double));
    }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class Reader {
public:
    explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    template <typename T>
    T pod(const char* what) {
        T x;
        std::memcpy(&x, take(sizeof(T), what), sizeof(T));
        return x;
    }
    const char* take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw FormatError(std::string("checkpoint truncated while reading ") + what, pos_);
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint64_t pos() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::vector<char> bytes_;
    std::uint64_t pos_ = 0;
};

struct NamedTensor {
    std::string name;
    Tensor value;
};

NamedTensor read_tensor(Reader& r) {
    const auto start = r.pos();
    const auto name_len = r.pod<std::uint32_t>("name length");
    if (name_len > 4096) throw FormatError("implausible tensor name length " + std::to_string(name_len), start);
    const char* name_ptr = r.take(name_len, "name");
    std::string name(name_ptr, name_len);
    const auto dtype_pos = r.pos();
    const auto dtype = r.pod<std::uint8_t>("dtype");
    if (dtype > 1) throw FormatError("unknown dtype " + std::to_string(dtype) + " for " + name, dtype_pos);
    const auto rank = r.pod<std::uint32_t>("rank");
    if (rank > 8) throw FormatError("implausible rank " + std::to_string(rank) + " for " + name, r.pos() - 4);
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.pod<std::uint64_t>("dims"));
    const auto n = shape_size(shape);
    std::vector<double> data(n);
    if (dtype == 0) {
        const char* p = r.take(n * sizeof(double), "values");
        std::memcpy(data.data(), p, n * sizeof(double));
    } else {
        const char* p = r.take(n * sizeof(float), "values");
        for (std::size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, p + i * sizeof(float), sizeof(float));
            data[i] = f;
        }
    }
    return {std::move(name), Tensor(std::move(shape), std::move(data))};
}

} // namespace

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
    Writer w;
    w.raw(magic, sizeof magic);
    w.pod(checkpoint_version);
    w.pod(static_cast<std::uint64_t>(3 * params.all().size() + 1));
    for (const auto& p : params.all()) w.tensor(p.name, p.value);
    for (const auto& p : params.all()) w.tensor("adam.m/" + p.name, p.first_moment);
    for (const auto& p : params.all()) w.tensor("adam.v/" + p.name, p.second_moment);
    w.tensor("adam.step", Tensor({}, {static_cast<double>(params.step())}));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

void load_checkpoint(ParamStore& params, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes));

    const char* m = r.take(sizeof magic, "magic");
    if (std::memcmp(m, magic, sizeof magic) != 0) throw FormatError("bad checkpoint magic", 0);
    const auto version = r.pod<std::uint32_t>("version");
    if (version != checkpoint_version)
        throw FormatError("checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(checkpoint_version),
                          4);
    const auto count = r.pod<std::uint64_t>("tensor count");

    // Decode everything before touching `params` so a bad file leaves it intact.
    std::vector<std::pair<std::uint64_t, NamedTensor>> tensors;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto at = r.pos();
        tensors.emplace_back(at, read_tensor(r));
    }
    if (!r.done()) throw FormatError("trailing bytes after checkpoint tensors", r.pos());

    auto lookup = [&](const std::string& name) -> const std::pair<std::uint64_t, NamedTensor>* {
        for (const auto& t : tensors)
            if (t.second.name == name) return &t;
        return nullptr;
    };
    auto require = [&](const std::string& name, const Shape& shape) -> const Tensor& {
        const auto* t = lookup(name);
        if (t == nullptr) throw FormatError("checkpoint lacks tensor " + name, r.pos());
        if (t->second.value.shape() != shape)
            throw FormatError("shape mismatch for " + name + ": file " + shape_string(t->second.value.shape()) +
                                  ", model " + shape_string(shape),
                              t->first);
        return t->second.value;
    };
    if (tensors.size() != 3 * params.all().size() + 1)
        throw FormatError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                              std::to_string(3 * params.all().size() + 1),
                          8);

    std::vector<Tensor> values, first, second;
    for (const auto& p : params.all()) {
        values.push_back(require(p.name, p.value.shape()));
        first.push_back(require("adam.m/" + p.name, p.value.shape()));
        second.push_back(require("adam.v/" + p.name, p.value.shape()));
    }
    const auto& step = require("adam.step", {});
    std::size_t i = 0;
    for (auto& p : params.all()) {
        p.value = std::move(values[i]);
        p.first_moment = std::move(first[i]);
        p.second_moment = std::move(second[i]);
        p.grad.fill(0.0);
        ++i;
    }
    params.set_step(static_cast<std::uint64_t>(step[0]));
}

} // namespace tabgraph::nn
