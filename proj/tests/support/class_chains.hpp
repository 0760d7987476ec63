#pragma once

#include <ebg/mujava.hpp>

#include <random>
#include <string>
#include <vector>

namespace support {

using namespace ebg::mujava;

// A random single-inheritance chain; each level defines some of the
// methods f0..f3, with a body naming its level.
Term random_chain(std::mt19937& rng, int depth, std::vector<std::vector<int>>& defined) {
    Term cls = null_class_def();
    for (int level = 0; level < depth; ++level) {
        MethodDefs methods;
        std::vector<int> here;
        std::vector<std::string> attrs;
        for (int m = 0; m < 4; ++m)
            if (rng() % 2) {
                here.push_back(m);
                Term body = jint(level * 10 + m);
                MethodDef def = rng() % 2 ? MethodDef(Method0Def{body}) : MethodDef(Method1Def{"p", body});
                methods = pair(methods, method("f" + std::to_string(m), def));
            }
        unsigned n_attrs = rng() % 3;
        for (unsigned a = 0; a < n_attrs; ++a) attrs.push_back("a" + std::to_string(level) + "_" + std::to_string(a));
        defined.push_back(here);
        cls = class_def(cls, attrs, methods);
    }
    return cls;
}

} // namespace support
