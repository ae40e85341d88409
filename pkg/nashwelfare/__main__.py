import sys

import nashwelfare.program


def main():
    program = nashwelfare.program.Program()
    sys.exit(program.run())


if __name__ == '__main__':
    main()
