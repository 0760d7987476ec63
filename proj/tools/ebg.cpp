#include <ebg/driver.hpp>

#include <iostream>

int main(int argc, char** argv) { return ebg::driver::main(argc, argv, std::cout, std::cerr); }
