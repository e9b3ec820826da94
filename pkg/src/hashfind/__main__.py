from hashfind.cli import entrypoint

entrypoint()
