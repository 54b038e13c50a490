def f(grid):
    total = 0
    for row in grid:
        for cell in row:
            if cell is None:
                continue
            total += cell
    return total
# oracle-call: f([[1, None], [2, 3]])
