#include "mipa/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace mipa {

namespace {

template <typename T>
void write_pod(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("truncated checkpoint " + path);
    return value;
}

} // namespace

const Matrix* Checkpoint::find(const std::string& name) const {
    for (const auto& [tensor_name, tensor] : tensors)
        if (tensor_name == name) return &tensor;
    return nullptr;
}

void save_checkpoint(const std::string& path, const nlohmann::json& meta, const nn::ParamRefs& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);

    write_pod(out, kCheckpointMagic);
    write_pod(out, kCheckpointVersion);
    const std::string meta_text = meta.dump();
    write_pod(out, static_cast<std::uint64_t>(meta_text.size()));
    out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));

    write_pod(out, static_cast<std::uint64_t>(params.size()));
    for (const nn::Parameter* p : params) {
        write_pod(out, static_cast<std::uint64_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod(out, static_cast<std::uint64_t>(p->value.rows()));
        write_pod(out, static_cast<std::uint64_t>(p->value.cols()));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);

    if (read_pod<std::uint32_t>(in, path) != kCheckpointMagic)
        throw std::runtime_error("not a checkpoint archive: " + path);
    const std::uint32_t version = read_pod<std::uint32_t>(in, path);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint version mismatch in " + path + ": found " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));

    Checkpoint checkpoint;
    const auto meta_len = read_pod<std::uint64_t>(in, path);
    std::string meta_text(meta_len, '\0');
    in.read(meta_text.data(), static_cast<std::streamsize>(meta_len));
    if (!in) throw std::runtime_error("truncated checkpoint " + path);
    checkpoint.meta = nlohmann::json::parse(meta_text);

    const auto count = read_pod<std::uint64_t>(in, path);
    checkpoint.tensors.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint64_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        const auto rows = read_pod<std::uint64_t>(in, path);
        const auto cols = read_pod<std::uint64_t>(in, path);
        Matrix tensor(static_cast<long>(rows), static_cast<long>(cols));
        in.read(reinterpret_cast<char*>(tensor.data()),
                static_cast<std::streamsize>(sizeof(double) * tensor.size()));
        if (!in) throw std::runtime_error("truncated checkpoint " + path);
        checkpoint.tensors.emplace_back(std::move(name), std::move(tensor));
    }
    return checkpoint;
}

void restore_params(const Checkpoint& checkpoint, const nn::ParamRefs& params) {
    for (nn::Parameter* p : params) {
        const Matrix* tensor = checkpoint.find(p->name);
        if (!tensor)
            throw std::runtime_error("checkpoint is missing tensor '" + p->name + "'");
        if (tensor->rows() != p->value.rows() || tensor->cols() != p->value.cols())
            throw std::runtime_error("checkpoint tensor '" + p->name + "' has shape " +
                                     std::to_string(tensor->rows()) + "x" + std::to_string(tensor->cols()) +
                                     ", expected " + std::to_string(p->value.rows()) + "x" +
                                     std::to_string(p->value.cols()));
        p->value = *tensor;
    }
}

} // namespace mipa
