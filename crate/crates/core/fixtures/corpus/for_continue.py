odds = 0
for i in range(6):
    if i % 2 == 0:
        continue
    odds += 1
print(odds)
