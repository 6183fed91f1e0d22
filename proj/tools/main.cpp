#include "pshuf/cli.hpp"

int main(int argc, char** argv) {
    return pshuf::run_cli(argc, argv);
}
