#include "cimle/serialize.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <ostream>

namespace cimle {

namespace io {

void put_u8(std::ostream& os, std::uint8_t v) {
    os.put(static_cast<char>(v));
}

void put_u32(std::ostream& os, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_i32(std::ostream& os, std::int32_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
}

void put_u64(std::ostream& os, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_f64(std::ostream& os, double v) {
    put_u64(os, std::bit_cast<std::uint64_t>(v));
}

std::uint8_t get_u8(std::istream& is) {
    const int c = is.get();
    if (c < 0) throw CorruptFileError("container: unexpected end of file");
    return static_cast<std::uint8_t>(c);
}

std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(get_u8(is)) << (8 * b);
    return v;
}

std::int32_t get_i32(std::istream& is) {
    return static_cast<std::int32_t>(get_u32(is));
}

std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(get_u8(is)) << (8 * b);
    return v;
}

double get_f64(std::istream& is) {
    return std::bit_cast<double>(get_u64(is));
}

} // namespace io

namespace {

constexpr char kMagic[5] = {'C', 'I', 'M', 'L', '1'};
constexpr std::uint8_t kKindLabels = 0;
constexpr std::uint8_t kKindTensor = 1;
constexpr std::uint8_t kKindDataset = 2;

void write_header(std::ostream& os, std::uint8_t kind,
                  const std::vector<std::int32_t>& dims) {
    os.write(kMagic, sizeof(kMagic));
    io::put_u8(os, kind);
    io::put_u8(os, static_cast<std::uint8_t>(dims.size()));
    for (std::int32_t d : dims) io::put_i32(os, d);
}

std::vector<std::int32_t> read_header(std::istream& is, std::uint8_t expect_kind) {
    char magic[5];
    is.read(magic, sizeof(magic));
    if (is.gcount() != sizeof(magic) ||
        !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
        throw CorruptFileError("container: bad magic");
    }
    const std::uint8_t kind = io::get_u8(is);
    if (kind != expect_kind) {
        throw CorruptFileError("container: unexpected record kind " +
                               std::to_string(kind));
    }
    const int ndims = io::get_u8(is);
    std::vector<std::int32_t> dims(ndims);
    for (auto& d : dims) {
        d = io::get_i32(is);
        // 0 is valid only as a dataset record count
        if (d < 0 || (d == 0 && expect_kind != kKindDataset)) {
            throw CorruptFileError("container: non-positive dimension");
        }
    }
    return dims;
}

template <typename F>
auto with_in_file(const std::string& path, F&& fn) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CorruptFileError("cannot open " + path);
    return fn(is);
}

template <typename F>
void with_out_file(const std::string& path, F&& fn) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path);
    fn(os);
    os.flush();
    if (!os) throw std::runtime_error("write failed for " + path);
}

} // namespace

void save_layout(std::ostream& os, const SemanticLayout& layout) {
    write_header(os, kKindLabels,
                 {layout.height(), layout.width(), layout.num_classes()});
    os.write(reinterpret_cast<const char*>(layout.labels().data()),
             static_cast<std::streamsize>(layout.labels().size()));
}

SemanticLayout load_layout(std::istream& is) {
    const auto dims = read_header(is, kKindLabels);
    if (dims.size() != 3) throw CorruptFileError("label map: expected 3 dims");
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1];
    std::vector<std::uint8_t> labels(n);
    is.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
        throw CorruptFileError("label map: truncated payload");
    }
    try {
        return SemanticLayout(dims[0], dims[1], dims[2], std::move(labels));
    } catch (const std::invalid_argument& e) {
        throw CorruptFileError(std::string("label map: ") + e.what());
    }
}

void save_image(std::ostream& os, const ImageTensor& image) {
    write_header(os, kKindTensor,
                 {image.height(), image.width(), image.channels()});
    for (double v : image.data()) io::put_f64(os, v);
}

ImageTensor load_image(std::istream& is) {
    const auto dims = read_header(is, kKindTensor);
    if (dims.size() != 3) throw CorruptFileError("tensor: expected 3 dims");
    const std::size_t n =
        static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<double> data(n);
    for (auto& v : data) v = io::get_f64(is);
    return ImageTensor(dims[0], dims[1], dims[2], std::move(data));
}

void save_dataset(std::ostream& os, const Dataset& dataset) {
    write_header(os, kKindDataset, {static_cast<std::int32_t>(dataset.size())});
    for (const Example& ex : dataset) {
        save_layout(os, ex.layout);
        save_image(os, ex.image);
    }
}

Dataset load_dataset(std::istream& is) {
    const auto dims = read_header(is, kKindDataset);
    if (dims.size() != 1) throw CorruptFileError("dataset: expected 1 dim");
    Dataset dataset;
    dataset.reserve(dims[0]);
    for (std::int32_t k = 0; k < dims[0]; ++k) {
        SemanticLayout layout = load_layout(is);
        ImageTensor image = load_image(is);
        dataset.push_back(Example{std::move(layout), std::move(image)});
    }
    return dataset;
}

void save_layout_file(const std::string& path, const SemanticLayout& layout) {
    with_out_file(path, [&](std::ostream& os) { save_layout(os, layout); });
}

void save_image_file(const std::string& path, const ImageTensor& image) {
    with_out_file(path, [&](std::ostream& os) { save_image(os, image); });
}

void save_dataset_file(const std::string& path, const Dataset& dataset) {
    with_out_file(path, [&](std::ostream& os) { save_dataset(os, dataset); });
}

SemanticLayout load_layout_file(const std::string& path) {
    return with_in_file(path, [](std::istream& is) { return load_layout(is); });
}

ImageTensor load_image_file(const std::string& path) {
    return with_in_file(path, [](std::istream& is) { return load_image(is); });
}

Dataset load_dataset_file(const std::string& path) {
    return with_in_file(path, [](std::istream& is) { return load_dataset(is); });
}

void write_ppm(const std::string& path, const ImageTensor& image) {
    if (image.channels() != 3) {
        throw std::invalid_argument("write_ppm: image must have 3 channels");
    }
    with_out_file(path, [&](std::ostream& os) {
        os << "P6\n" << image.width() << " " << image.height() << "\n255\n";
        for (int i = 0; i < image.height(); ++i) {
            for (int j = 0; j < image.width(); ++j) {
                for (int c = 0; c < 3; ++c) {
                    double v = image.at(i, j, c);
                    v = std::fmin(1.0, std::fmax(0.0, v));
                    const int q = static_cast<int>(std::lround(v * 255.0));
                    os.put(static_cast<char>(q));
                }
            }
        }
    });
}

std::uint32_t crc32(const unsigned char* data, std::size_t n, std::uint32_t seed) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) {
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            }
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) {
        c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    }
    return c ^ 0xFFFFFFFFu;
}

} // namespace cimle
