#include "cli/commands.hpp"

int main(int argc, char** argv)
{
  return nasbba::cli::run(argc, argv);
}
