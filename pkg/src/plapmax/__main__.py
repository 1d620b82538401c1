from plapmax.cli.main import run

run()
