#include <slatesim/nn/checkpoint.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace slatesim::nn {

    namespace {

        constexpr char kMagic[8] = {'S', 'L', 'S', 'M', 'C', 'K', 'P', 'T'};
        constexpr std::uint32_t kVersion = 1;

        template <typename T>
        void put_le(std::string& out, T value)
        {
            for (std::size_t i = 0; i < sizeof(T); ++i)
                out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
        }

        class Reader {
        public:
            explicit Reader(std::string bytes) : _bytes(std::move(bytes)) {}

            template <typename T>
            T get()
            {
                need(sizeof(T));
                std::uint64_t v = 0;
                for (std::size_t i = 0; i < sizeof(T); ++i)
                    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(_bytes[_pos + i])) << (8 * i);
                _pos += sizeof(T);
                return static_cast<T>(v);
            }

            std::string take(std::size_t n)
            {
                need(n);
                std::string s = _bytes.substr(_pos, n);
                _pos += n;
                return s;
            }

        private:
            void need(std::size_t n) const
            {
                if (_pos + n > _bytes.size())
                    throw DataError("checkpoint truncated");
            }

            std::string _bytes;
            std::size_t _pos = 0;
        };

        std::string read_all(const std::filesystem::path& path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw DataError("cannot open " + path.string());
            return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        }

    } // namespace

    const CheckpointTensor* Checkpoint::find(const std::string& name) const
    {
        for (const auto& t : tensors)
            if (t.name == name)
                return &t;
        return nullptr;
    }

    void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedStore>& stores, const nlohmann::json& meta)
    {
        std::string out(kMagic, sizeof(kMagic));
        put_le<std::uint32_t>(out, kVersion);
        const std::string meta_text = meta.dump();
        put_le<std::uint64_t>(out, meta_text.size());
        out += meta_text;

        std::uint32_t count = 0;
        for (const auto& s : stores)
            count += static_cast<std::uint32_t>(s.store->size());
        put_le<std::uint32_t>(out, count);

        for (const auto& s : stores) {
            for (const auto& e : s.store->entries()) {
                const std::string name = s.prefix + e.name;
                put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
                out += name;
                put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rows()));
                put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.cols()));
                for (Eigen::Index i = 0; i < e.value.size(); ++i)
                    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(e.value(i)));
            }
        }

        std::ofstream file(path, std::ios::binary | std::ios::trunc);
        if (!file)
            throw DataError("cannot write " + path.string());
        file.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!file)
            throw DataError("write failed for " + path.string());
    }

    void write_checkpoint(const std::filesystem::path& path, const ParamStore<float>& store, const nlohmann::json& meta)
    {
        write_checkpoint(path, std::vector<NamedStore>{{"", &store}}, meta);
    }

    Checkpoint read_checkpoint(const std::filesystem::path& path)
    {
        Reader in(read_all(path));
        if (in.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
            throw DataError(path.string() + " is not a checkpoint");
        if (in.get<std::uint32_t>() != kVersion)
            throw DataError("unsupported checkpoint version");

        Checkpoint ckpt;
        const auto meta_len = in.get<std::uint64_t>();
        ckpt.meta = nlohmann::json::parse(in.take(static_cast<std::size_t>(meta_len)));
        const auto count = in.get<std::uint32_t>();
        for (std::uint32_t t = 0; t < count; ++t) {
            CheckpointTensor tensor;
            tensor.name = in.take(in.get<std::uint32_t>());
            tensor.rows = in.get<std::uint32_t>();
            tensor.cols = in.get<std::uint32_t>();
            tensor.data.resize(static_cast<std::size_t>(tensor.rows) * tensor.cols);
            for (auto& v : tensor.data)
                v = std::bit_cast<float>(in.get<std::uint32_t>());
            ckpt.tensors.push_back(std::move(tensor));
        }
        return ckpt;
    }

    void load_into(const Checkpoint& checkpoint, const std::string& prefix, ParamStore<float>& store)
    {
        for (auto& e : store.entries()) {
            const auto* t = checkpoint.find(prefix + e.name);
            if (!t)
                throw DataError("checkpoint lacks tensor '" + prefix + e.name + "'");
            if (t->rows != e.value.rows() || t->cols != e.value.cols())
                throw ShapeError("checkpoint tensor '" + t->name + "' has the wrong shape");
            for (Eigen::Index i = 0; i < e.value.size(); ++i)
                e.value(i) = t->data[static_cast<std::size_t>(i)];
        }
    }

} // namespace slatesim::nn
