#include "gap/ndiff/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "gap/common/binary_io.hpp"

namespace gap::ndiff {

void write_tensors(const std::filesystem::path& path, const std::map<std::string, Tensor>& tensors) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(kWeightsMagic, 4);
        io::write_le<std::uint32_t>(out, kWeightsVersion);
        io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
        for (const auto& [name, t] : tensors) {
            io::write_string(out, name);
            io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
            for (auto e : t.shape()) io::write_le<std::uint64_t>(out, e);
            for (double v : t.data()) io::write_le<double>(out, v);
        }
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::map<std::string, Tensor> read_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    io::expect_magic(in, kWeightsMagic, path.string());
    const auto version = io::read_le<std::uint32_t>(in, "version");
    if (version != kWeightsVersion) {
        throw std::runtime_error(path.string() + ": unsupported weights version " + std::to_string(version));
    }
    const auto count = io::read_le<std::uint32_t>(in, "tensor count");
    std::map<std::string, Tensor> out;
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name = io::read_string(in, "tensor name");
        const auto rank = io::read_le<std::uint32_t>(in, "rank");
        if (rank == 0 || rank > 8) throw std::runtime_error(path.string() + ": bad rank for " + name);
        Shape shape(rank);
        for (auto& e : shape) e = static_cast<std::size_t>(io::read_le<std::uint64_t>(in, "extent"));
        std::vector<double> data(shape_product(shape));
        for (double& v : data) v = io::read_le<double>(in, name);
        out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

void save_params(const std::filesystem::path& path, const ParamStore& store) {
    std::map<std::string, Tensor> tensors;
    for (const auto& [name, p] : store.items()) tensors.emplace(name, p.value);
    write_tensors(path, tensors);
}

void load_params(const std::filesystem::path& path, ParamStore& store) {
    auto tensors = read_tensors(path);
    if (tensors.size() != store.items().size()) {
        throw std::runtime_error(path.string() + ": expected " + std::to_string(store.items().size()) +
                                 " tensors, found " + std::to_string(tensors.size()));
    }
    for (auto& [name, p] : store.items()) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::runtime_error(path.string() + ": missing tensor " + name);
        if (it->second.shape() != p.value.shape()) {
            throw std::runtime_error(path.string() + ": tensor " + name + " has shape " +
                                     shape_string(it->second.shape()) + ", expected " + shape_string(p.value.shape()));
        }
        p.value = std::move(it->second);
    }
}

}  // namespace gap::ndiff
