#include "uvreenact/cli.hpp"

int main(int argc, char** argv)
{
    return uvreenact::cli_main(argc, argv);
}
