#include "lanerisk/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace lanerisk {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};

void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t get_u32_le(std::istream& is, std::size_t offset) {
    unsigned char buf[4];
    if (!is.read(reinterpret_cast<char*>(buf), 4)) {
        throw FormatError("tensor file truncated at byte offset " + std::to_string(offset));
    }
    return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t, TensorDType dtype) {
    os.write(kMagic, 4);
    const unsigned char version = 1;
    const unsigned char code = static_cast<unsigned char>(dtype);
    const unsigned char rank = static_cast<unsigned char>(t.rank());
    os.put(static_cast<char>(version));
    os.put(static_cast<char>(code));
    os.put(static_cast<char>(rank));
    for (std::size_t e : t.shape()) {
        put_u32_le(os, static_cast<std::uint32_t>(e));
    }
    // Assumes a little-endian host, which covers every supported target.
    if (dtype == TensorDType::F64) {
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const float f = static_cast<float>(t[i]);
            os.write(reinterpret_cast<const char*>(&f), sizeof(float));
        }
    }
}

void write_tensor(const std::filesystem::path& path, const Tensor& t, TensorDType dtype) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    write_tensor(os, t, dtype);
    if (!os) throw IoError("write failed: " + path.string());
}

Tensor read_tensor(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("bad tensor magic at byte offset 0 (expected \"TNSR\")");
    }
    int version = is.get();
    if (version != 1) {
        throw FormatError("unsupported tensor version " + std::to_string(version) +
                          " at byte offset 4");
    }
    int code = is.get();
    if (code != static_cast<int>(TensorDType::F32) && code != static_cast<int>(TensorDType::F64)) {
        throw FormatError("unknown dtype code " + std::to_string(code) + " at byte offset 5");
    }
    int rank = is.get();
    if (rank < 1) {
        throw FormatError("invalid rank " + std::to_string(rank) + " at byte offset 6");
    }
    std::vector<std::size_t> shape;
    std::size_t offset = 7;
    std::size_t count = 1;
    for (int d = 0; d < rank; ++d) {
        std::uint32_t e = get_u32_le(is, offset);
        if (e == 0) {
            throw FormatError("zero extent at byte offset " + std::to_string(offset));
        }
        shape.push_back(e);
        count *= e;
        offset += 4;
    }
    std::vector<double> data(count);
    if (code == static_cast<int>(TensorDType::F64)) {
        if (!is.read(reinterpret_cast<char*>(data.data()),
                     static_cast<std::streamsize>(count * sizeof(double)))) {
            throw FormatError("tensor data truncated at byte offset " + std::to_string(offset));
        }
    } else {
        std::vector<float> raw(count);
        if (!is.read(reinterpret_cast<char*>(raw.data()),
                     static_cast<std::streamsize>(count * sizeof(float)))) {
            throw FormatError("tensor data truncated at byte offset " + std::to_string(offset));
        }
        for (std::size_t i = 0; i < count; ++i) data[i] = raw[i];
    }
    return Tensor(std::move(shape), std::move(data));
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    return read_tensor(is);
}

}  // namespace lanerisk
