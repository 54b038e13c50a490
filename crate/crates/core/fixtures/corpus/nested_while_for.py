rows = 0
while rows < 3:
    for c in range(2):
        print(rows, c)
    rows += 1
