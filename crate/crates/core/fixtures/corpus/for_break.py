found = -1
for i, v in enumerate([4, 8, 15, 16]):
    if v > 10:
        found = i
        break
print(found)
