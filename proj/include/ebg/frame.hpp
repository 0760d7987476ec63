#pragma once

// Heap-allocated activation frames: an immutable linked list that grows at
// the front. Shared by the lifted-program evaluator and the target VM.

#include <ebg/core.hpp>

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace ebg {

class FrameError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

template <class T> struct FrameCell;

template <class T> class Frame {
public:
    Frame() = default;

    Frame push(T head) const {
        return Frame(std::make_shared<const FrameCell<T>>(FrameCell<T>{std::move(head), *this}));
    }

    bool empty() const { return !cell_; }
    const T& head() const { return cell_->head; }
    const Frame& tail() const { return cell_->tail; }

    std::size_t length() const {
        std::size_t n = 0;
        for (const Frame* f = this; !f->empty(); f = &f->tail()) ++n;
        return n;
    }

    const void* identity() const { return cell_.get(); }

private:
    explicit Frame(std::shared_ptr<const FrameCell<T>> cell) : cell_(std::move(cell)) {}

    std::shared_ptr<const FrameCell<T>> cell_;
};

template <class T> struct FrameCell {
    T head;
    Frame<T> tail;
};

template <class T, int Base> const T& frame_local(const Frame<T>& frame, SlotIndex<Base> index) {
    int offset = index.offset();
    if (offset < 0) throw FrameError("frame index " + std::to_string(index.value) + " below base");
    const Frame<T>* f = &frame;
    for (int i = 0; i < offset && !f->empty(); ++i) f = &f->tail();
    if (f->empty())
        throw FrameError("frame index " + std::to_string(index.value) + " out of range (length " +
                         std::to_string(frame.length()) + ")");
    return f->head();
}

} // namespace ebg
