items = [1, 2, 3]
idx = 0
while idx <= 3:
    value = items[idx]
    idx += 1
print(value)
