// Placeholder main; subcommands are added with the evalharness.
int main() { return 0; }
