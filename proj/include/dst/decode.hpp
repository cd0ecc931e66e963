#pragma once

#include "dst/cascade.hpp"
#include "dst/matrix_tree.hpp"

namespace dst {

// Maximum-score directed spanning arborescence rooted at the dummy root,
// via the classic recursive Chu-Liu-Edmonds algorithm. Ties prefer the
// smaller parent index. Throws NoValidTree when the mask admits no
// arborescence.
Arborescence best_tree(const EdgeScores& scores);

}  // namespace dst
