#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "spanft/error.hpp"
#include "spanft/ngram_dict.hpp"
#include "spanft/segmenter.hpp"
#include "spanft/text.hpp"

namespace py = pybind11;

namespace {

using Range = std::pair<std::size_t, std::size_t>;

struct ClosedHandle : std::runtime_error {
  ClosedHandle() : std::runtime_error("dictionary handle is closed") {}
};

// Read-only view of a loaded dictionary. close() drops the reference; calls
// already in flight keep their own copy.
class Dictionary {
 public:
  explicit Dictionary(spanft::NgramDictionary dict)
      : dict_(std::make_shared<const spanft::NgramDictionary>(std::move(dict))) {}

  static Dictionary load(const std::string& path) {
    spanft::NgramDictionary dict;
    {
      py::gil_scoped_release release;
      dict = spanft::load_dictionary(path);
    }
    return Dictionary(std::move(dict));
  }

  std::size_t size() const { return get()->size(); }
  std::size_t max_n() const { return get()->max_n(); }
  bool closed() const { return dict_ == nullptr; }
  void close() { dict_.reset(); }

  bool contains(const std::vector<std::string>& tokens) const { return get()->contains(tokens); }

  std::pair<std::vector<std::string>, std::vector<Range>> segment(const std::string& text) const {
    const auto dict = get();
    py::gil_scoped_release release;
    auto words = spanft::normalize_and_tokenize(text);
    const auto partition = spanft::segment_greedy(*dict, words);
    std::vector<Range> spans;
    for (const auto& s : partition) spans.emplace_back(s.start, s.end);
    return {std::move(words.words), std::move(spans)};
  }

  // The JSON line the command-line `segment` writes for this sentence.
  std::string segment_record(const std::string& text) const {
    const auto dict = get();
    py::gil_scoped_release release;
    const auto words = spanft::normalize_and_tokenize(text);
    return spanft::segmentation_record(words, spanft::segment_greedy(*dict, words));
  }

 private:
  std::shared_ptr<const spanft::NgramDictionary> get() const {
    if (!dict_) throw ClosedHandle();
    return dict_;
  }

  std::shared_ptr<const spanft::NgramDictionary> dict_;
};

std::vector<spanft::Span> to_spans(const std::vector<Range>& ranges) {
  std::vector<spanft::Span> out;
  out.reserve(ranges.size());
  for (const auto& [a, b] : ranges) out.push_back({a, b});
  return out;
}

std::vector<Range> project(const std::vector<Range>& spans, const std::vector<Range>& alignment,
                           std::size_t cls_offset) {
  std::size_t words = spans.empty() ? 0 : spans.back().second;
  spanft::SpanPartition partition;
  try {
    partition = spanft::SpanPartition(to_spans(spans), words);
  } catch (const spanft::ValidationError& e) {
    throw spanft::AlignmentError(std::string("spans are not a partition: ") + e.what());
  }
  spanft::SubwordAlignment a;
  a.ranges = to_spans(alignment);
  a.cls_offset = cls_offset;
  std::vector<Range> out;
  for (const auto& s : spanft::project_to_subwords(partition, a)) out.emplace_back(s.start, s.end);
  return out;
}

}  // namespace

PYBIND11_MODULE(_spanft, m) {
  m.doc() = "Dictionary-driven span segmentation";

  static py::exception<spanft::Error> base(m, "SpanftError", PyExc_RuntimeError);
  static py::exception<spanft::ParseError> parse(m, "ParseError", base.ptr());
  static py::exception<spanft::VersionError> version(m, "VersionError", base.ptr());
  static py::exception<spanft::ValidationError> validation(m, "ValidationError", base.ptr());
  static py::exception<spanft::EmptySentenceError> empty(m, "EmptySentenceError", base.ptr());
  static py::exception<spanft::AlignmentError> alignment(m, "AlignmentError", base.ptr());
  static py::exception<ClosedHandle> closed(m, "ClosedHandleError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const spanft::ParseError& e) {
      py::set_error(parse, e.what());
    } catch (const spanft::VersionError& e) {
      py::set_error(version, e.what());
    } catch (const spanft::ValidationError& e) {
      py::set_error(validation, e.what());
    } catch (const spanft::EmptySentenceError& e) {
      py::set_error(empty, e.what());
    } catch (const spanft::AlignmentError& e) {
      py::set_error(alignment, e.what());
    } catch (const spanft::Error& e) {
      py::set_error(base, e.what());
    } catch (const ClosedHandle& e) {
      py::set_error(closed, e.what());
    }
  });

  py::class_<Dictionary>(m, "Dictionary")
      .def_static("load", &Dictionary::load, py::arg("path"), "Load a SPANDICT v1 file.")
      .def("__len__", &Dictionary::size)
      .def_property_readonly("size", &Dictionary::size)
      .def_property_readonly("max_n", &Dictionary::max_n)
      .def_property_readonly("closed", &Dictionary::closed)
      .def("close", &Dictionary::close)
      .def("__enter__", [](Dictionary& d) -> Dictionary& { return d; },
           py::return_value_policy::reference)
      .def("__exit__", [](Dictionary& d, py::args) { d.close(); })
      .def("contains", &Dictionary::contains, py::arg("tokens"))
      .def("segment", &Dictionary::segment, py::arg("text"),
           "Normalize and greedily segment; returns (tokens, [(start, end), ...]).")
      .def("segment_record", &Dictionary::segment_record, py::arg("text"),
           "The JSON line the command-line segmenter writes for `text`.");

  m.def("load_dictionary", &Dictionary::load, py::arg("path"));
  m.def("normalize", [](const std::string& text) { return spanft::normalize_words(text); },
        py::arg("text"));
  m.def("project", &project, py::arg("spans"), py::arg("alignment"), py::arg("cls_offset") = 0,
        "Map word spans onto subword ranges given per-word subword ranges.");
}
