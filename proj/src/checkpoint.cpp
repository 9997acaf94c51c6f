#include "lvgpt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "lvgpt/error.hpp"

namespace lvgpt {

namespace {

class Writer {
public:
    template <typename U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void str(const std::string& s) {
        uint<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

    template <typename U>
    U uint() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(in_[pos_++]) << (8 * i));
        return v;
    }
    std::vector<std::uint8_t> bytes(std::size_t n) {
        need(n);
        std::vector<std::uint8_t> v(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                    in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return v;
    }
    std::string str() {
        const auto n = uint<std::uint32_t>();
        auto b = bytes(n);
        return std::string(b.begin(), b.end());
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    }
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

std::size_t dtype_size(DType d) {
    switch (d) {
        case DType::f32: return 4;
        case DType::f64: return 8;
    }
    throw CheckpointError("unknown dtype code " + std::to_string(static_cast<int>(d)));
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kCheckpointMagic, 4);
    w.uint<std::uint32_t>(kCheckpointVersion);
    w.str(ckpt.config_text);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(ckpt.vocab.size()));
    for (const auto& s : ckpt.vocab) w.str(s);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(ckpt.labels.size()));
    for (const auto& s : ckpt.labels) w.str(s);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        if (t.raw.size() != numel(t.shape) * dtype_size(t.dtype)) {
            throw CheckpointError("tensor '" + t.name + "' payload does not match its shape");
        }
        w.str(t.name);
        w.uint<std::uint8_t>(static_cast<std::uint8_t>(t.dtype));
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
        for (auto e : t.shape) w.uint<std::uint64_t>(e);
        w.bytes(t.raw.data(), t.raw.size());
    }
    return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    auto magic = r.bytes(4);
    if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) throw CheckpointError("not an LVGP checkpoint");
    const auto version = r.uint<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    c.config_text = r.str();
    c.vocab.resize(r.uint<std::uint32_t>());
    for (auto& s : c.vocab) s = r.str();
    c.labels.resize(r.uint<std::uint32_t>());
    for (auto& s : c.labels) s = r.str();
    const auto count = r.uint<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        StoredTensor t;
        t.name = r.str();
        t.dtype = static_cast<DType>(r.uint<std::uint8_t>());
        const std::size_t esize = dtype_size(t.dtype);
        t.shape.resize(r.uint<std::uint32_t>());
        for (auto& e : t.shape) e = r.uint<std::uint64_t>();
        t.raw = r.bytes(numel(t.shape) * esize);
        c.tensors.push_back(std::move(t));
    }
    if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
    return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = encode_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

template <typename T>
StoredTensor store_tensor(const std::string& name, const Tensor<T>& t) {
    StoredTensor s;
    s.name = name;
    s.dtype = dtype_of<T>();
    s.shape = t.shape();
    s.raw.reserve(t.numel() * sizeof(T));
    for (T v : t.data()) {
        const auto bits = std::bit_cast<Bits<T>>(v);
        for (std::size_t i = 0; i < sizeof(T); ++i) s.raw.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    return s;
}

template <typename T>
Tensor<T> restore_tensor(const StoredTensor& s) {
    if (s.dtype != dtype_of<T>()) {
        throw CheckpointError("tensor '" + s.name + "' stored as " + (s.dtype == DType::f32 ? "f32" : "f64") +
                              ", requested " + (dtype_of<T>() == DType::f32 ? "f32" : "f64"));
    }
    const std::size_t n = numel(s.shape);
    if (s.raw.size() != n * sizeof(T)) throw CheckpointError("tensor '" + s.name + "' has a short payload");
    std::vector<T> data(n);
    for (std::size_t k = 0; k < n; ++k) {
        Bits<T> bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<Bits<T>>(s.raw[k * sizeof(T) + i]) << (8 * i);
        data[k] = std::bit_cast<T>(bits);
    }
    return Tensor<T>::from_data(s.shape, std::move(data));
}

template <typename T>
std::vector<StoredTensor> store_parameters(const LVGPTModel<T>& model) {
    std::vector<StoredTensor> out;
    for (const auto& [name, t] : model.named_parameters()) out.push_back(store_tensor(name, t));
    return out;
}

template <typename T>
void load_parameters(LVGPTModel<T>& model, const std::vector<StoredTensor>& tensors) {
    std::map<std::string, const StoredTensor*> by_name;
    for (const auto& t : tensors) by_name[t.name] = &t;
    auto params = model.named_parameters();
    if (params.size() != tensors.size()) {
        throw CheckpointError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                              std::to_string(params.size()));
    }
    for (auto& [name, param] : params) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
        if (it->second->shape != param.shape()) {
            throw CheckpointError("tensor '" + name + "' has shape " + to_string(it->second->shape) +
                                  ", model expects " + to_string(param.shape()));
        }
        auto restored = restore_tensor<T>(*it->second);
        std::copy(restored.data().begin(), restored.data().end(), param.data().begin());
    }
}

#define LVGPT_INSTANTIATE_CKPT(T)                                                          \
    template StoredTensor store_tensor<T>(const std::string&, const Tensor<T>&);             \
    template Tensor<T> restore_tensor<T>(const StoredTensor&);                               \
    template std::vector<StoredTensor> store_parameters<T>(const LVGPTModel<T>&);            \
    template void load_parameters<T>(LVGPTModel<T>&, const std::vector<StoredTensor>&);

LVGPT_INSTANTIATE_CKPT(float)
LVGPT_INSTANTIATE_CKPT(double)

}  // namespace lvgpt
